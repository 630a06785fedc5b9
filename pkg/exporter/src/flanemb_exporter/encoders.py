"""Text encoders behind one batch interface.

The default is a pretrained sentence encoder loaded by checkpoint id.  A
deterministic ``hash:DIM:SEED`` encoder exists for tests and offline runs;
it needs no model download.
"""

from __future__ import annotations

import numpy as np

from .hashing import text_key

DEFAULT_ENCODER = "sentence-transformers/stsb-roberta-large"


class EncoderUnavailable(Exception):
    """The requested encoder could not be loaded."""


class HashEncoder:
    """Deterministic pseudo-embeddings seeded from the text hash."""

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed

    def encode(self, texts: list[str]) -> np.ndarray:
        rows = []
        for text in texts:
            rng = np.random.default_rng((text_key(text) ^ self.seed) & 0xFFFFFFFFFFFFFFFF)
            vec = rng.standard_normal(self.dim)
            norm = np.linalg.norm(vec)
            rows.append(vec / norm if norm > 0 else vec)
        return np.vstack(rows).astype(np.float32)


class SentenceTransformerEncoder:
    """Wraps a sentence-transformers checkpoint."""

    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderUnavailable(
                "sentence-transformers is not installed; install the [st] extra "
                "or use a hash:DIM:SEED encoder"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise EncoderUnavailable(f"could not load encoder {model_id!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        vecs = self._model.encode(
            texts, convert_to_numpy=True, normalize_embeddings=False, show_progress_bar=False
        )
        return np.asarray(vecs, dtype=np.float32)


def get_encoder(spec: str):
    if spec.startswith("hash:"):
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"bad hash encoder spec {spec!r}; use hash:DIM or hash:DIM:SEED")
        dim = int(parts[1])
        seed = int(parts[2]) if len(parts) == 3 else 0
        return HashEncoder(dim, seed)
    return SentenceTransformerEncoder(spec)
