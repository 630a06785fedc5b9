"""The export job: read texts, encode in batches, emit one record per text."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import get_encoder
from .hashing import text_key
from .writer import WriteError, write_flanemb


@dataclass(frozen=True)
class ExportJob:
    input_path: str
    output_path: str
    encoder: str
    batch_size: int = 64
    normalize: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def read_texts(path: str | Path) -> list[str]:
    """Unique node texts from JSONL lines carrying a "text" field."""
    seen: set[str] = set()
    out: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                text = json.loads(line)["text"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: expected a JSON object with 'text'") from exc
            if text not in seen:
                seen.add(text)
                out.append(text)
    return out


def export(job: ExportJob) -> int:
    """Run the job; returns the number of records written."""
    texts = read_texts(job.input_path)
    encoder = get_encoder(job.encoder)
    records: dict[int, np.ndarray] = {}
    for start in range(0, len(texts), job.batch_size):
        batch = texts[start: start + job.batch_size]
        vecs = encoder.encode(batch)
        for text, vec in zip(batch, vecs):
            if job.normalize:
                norm = float(np.linalg.norm(vec))
                if norm > 0:
                    vec = vec / norm
            key = text_key(text)
            if key in records:
                raise WriteError(f"hash collision on key {key} (text {text[:40]!r})")
            records[key] = vec.astype(np.float32)
    write_flanemb(job.output_path, encoder.dim, records)
    return len(records)
