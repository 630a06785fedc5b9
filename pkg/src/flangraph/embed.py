"""Node-text embeddings: a deterministic hashing backend and table loading.

Tables are keyed by the 64-bit FNV-1a hash of the exact UTF-8 node text, so
inherited duplicate nodes share one entry.  The on-disk format FLANEMB1 is,
little-endian:

    magic   8 bytes  b"FLANEMB1"
    dim     u32
    count   u32
    records count x (key u64, dim x f32)

A JSONL fallback is accepted too: first line ``{"dim": D}``, then one
``{"key": "<u64 as string>", "vec": [...]}`` object per line.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    DuplicateKey,
    MissingEmbedding,
    TruncatedFile,
)
from .graph import FlanGraph
from .parsing import tokenize

MAGIC = b"FLANEMB1"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def text_key(text: str) -> int:
    return fnv1a_64(text.encode("utf-8"))


def hash_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Feature-hash a text into a unit-norm vector.

    Lowercased word unigrams and bigrams are hashed into ``dim`` buckets with
    a +/-1 sign from a second hash, then L2-normalized.  Text with no tokens
    maps to the zero vector.
    """
    if dim < 8:
        raise ValueError(f"hash_embed needs dim >= 8, got {dim}")
    seed_bytes = struct.pack("<Q", seed & _MASK64)
    vec = np.zeros(dim, dtype=np.float64)
    tokens = tokenize(text)
    features = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    for feat in features:
        payload = seed_bytes + feat.encode("utf-8")
        bucket_hash = fnv1a_64(payload)
        sign_hash = fnv1a_64(b"\x01" + payload)
        sign = 1.0 if sign_hash & 1 else -1.0
        vec[bucket_hash % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    entries: dict[int, np.ndarray]

    def __post_init__(self):
        for key, vec in self.entries.items():
            if vec.shape != (self.dim,):
                raise DimMismatch(f"key {key}: vector has shape {vec.shape}, dim is {self.dim}")
            if not np.all(np.isfinite(vec)):
                raise DimMismatch(f"key {key}: vector has non-finite components")

    def __len__(self) -> int:
        return len(self.entries)


def write_embedding_table(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", table.dim, len(table.entries)))
        for key in sorted(table.entries):
            fh.write(struct.pack("<Q", key))
            fh.write(np.asarray(table.entries[key], dtype="<f4").tobytes())


def _load_binary(raw: bytes, path: Path) -> EmbeddingTable:
    header = struct.calcsize("<II")
    if len(raw) < len(MAGIC) + header:
        raise TruncatedFile(f"{path}: shorter than the header")
    dim, count = struct.unpack_from("<II", raw, len(MAGIC))
    record = 8 + 4 * dim
    body = raw[len(MAGIC) + header:]
    if len(body) != count * record:
        raise TruncatedFile(
            f"{path}: expected {count * record} payload bytes, found {len(body)}"
        )
    entries: dict[int, np.ndarray] = {}
    for i in range(count):
        off = i * record
        (key,) = struct.unpack_from("<Q", body, off)
        if key in entries:
            raise DuplicateKey(f"{path}: key {key} appears twice")
        vec = np.frombuffer(body, dtype="<f4", count=dim, offset=off + 8)
        entries[key] = vec.astype(np.float64)
    return EmbeddingTable(dim=dim, entries=entries)


def _load_jsonl(text: str, path: Path) -> EmbeddingTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TruncatedFile(f"{path}: empty embedding file")
    head = json.loads(lines[0])
    if "dim" not in head:
        raise BadMagic(f"{path}: first JSONL line must declare dim")
    dim = int(head["dim"])
    entries: dict[int, np.ndarray] = {}
    for ln in lines[1:]:
        rec = json.loads(ln)
        key = int(rec["key"])
        vec = np.asarray(rec["vec"], dtype=np.float64)
        if vec.shape != (dim,):
            raise DimMismatch(f"{path}: key {key} has {vec.shape[0]} dims, declared {dim}")
        if key in entries:
            raise DuplicateKey(f"{path}: key {key} appears twice")
        entries[key] = vec
    return EmbeddingTable(dim=dim, entries=entries)


def load_embedding_table(path: str | Path) -> EmbeddingTable:
    """Load a FLANEMB1 file, falling back to the JSONL form."""
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(MAGIC):
        return _load_binary(raw, path)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BadMagic(f"{path}: neither FLANEMB1 nor JSONL") from exc
    if not text.lstrip().startswith("{"):
        raise BadMagic(f"{path}: neither FLANEMB1 nor JSONL")
    return _load_jsonl(text, path)


class HashBackend:
    """Deterministic embedding backend; caches per unique text."""

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def vector(self, text: str) -> np.ndarray:
        vec = self._cache.get(text)
        if vec is None:
            vec = hash_embed(text, self.dim, self.seed)
            self._cache[text] = vec
        return vec


class TableBackend:
    """Looks node texts up in a pre-computed table."""

    def __init__(self, table: EmbeddingTable):
        self.table = table
        self.dim = table.dim

    def vector(self, text: str) -> np.ndarray:
        key = text_key(text)
        vec = self.table.entries.get(key)
        if vec is None:
            raise MissingEmbedding(key, text)
        return vec


@dataclass(frozen=True)
class EmbeddedGraph:
    graph: FlanGraph
    features: np.ndarray  # (num_nodes, dim) float64

    def __post_init__(self):
        if self.features.shape[0] != len(self.graph.nodes):
            raise DimMismatch(
                f"feature rows {self.features.shape[0]} != nodes {len(self.graph.nodes)}"
            )
        if not np.all(np.isfinite(self.features)):
            raise DimMismatch("feature matrix contains non-finite values")


def embed_graph(graph: FlanGraph, backend) -> EmbeddedGraph:
    """Row-per-node feature matrix in node-id order."""
    rows = [backend.vector(node.text) for node in graph.nodes]
    features = np.vstack(rows).astype(np.float64)
    return EmbeddedGraph(graph=graph, features=features)
