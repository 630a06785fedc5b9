"""Corpus ingestion, the time-ordered split, feature vectors, statistics.

Applications arrive as JSONL (gzip accepted by extension), one per line:

    {"application_id": "...", "filing_date": "YYYY-MM-DD",
     "claims": [{"number": 1, "text": "...", "label": 1}, ...]}

Labels are optional so the same files serve inference.  Feature vectors are
opaque externally-computed reals, keyed by (application_id, claim_number).
"""

from __future__ import annotations

import gzip
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimMismatch,
    DuplicateKey,
    EmptyInput,
    InvariantViolation,
    ParseError,
)
from .model import Application, DatasetSplit


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


@dataclass(frozen=True)
class LoadError:
    line: int
    message: str


def load_applications(
    path: str | Path, strict: bool = False
) -> tuple[list[Application], list[LoadError]]:
    """Read applications from JSONL; malformed lines are collected, not fatal.

    With ``strict`` the first bad line raises instead.
    """
    path = Path(path)
    apps: list[Application] = []
    errors: list[LoadError] = []
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                apps.append(Application.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                if strict:
                    raise ParseError(str(exc), lineno) from exc
                errors.append(LoadError(lineno, f"parse error: {exc}"))
            except InvariantViolation as exc:
                if strict:
                    raise ParseError(str(exc), lineno) from exc
                errors.append(LoadError(lineno, str(exc)))
    return apps, errors


def write_applications(apps: Iterable[Application], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for app in apps:
            fh.write(app.to_json() + "\n")


def filter_min_date(apps: Sequence[Application], min_date: str | None) -> list[Application]:
    if min_date is None:
        return list(apps)
    return [a for a in apps if a.filing_date >= min_date]


def split_counts(n: int, train_frac: float, valid_frac: float) -> tuple[int, int]:
    if train_frac <= 0 or valid_frac <= 0 or train_frac + valid_frac >= 1:
        raise ValueError(
            f"need 0 < train_frac, valid_frac and train_frac + valid_frac < 1, "
            f"got {train_frac}, {valid_frac}"
        )
    return math.floor(train_frac * n), math.floor(valid_frac * n)


def split_application_ids(
    pairs: Sequence[tuple[str, str]], train_frac: float, valid_frac: float
) -> dict[str, str]:
    """Map application_id -> partition from (filing_date, application_id) pairs."""
    if not pairs:
        raise EmptyInput("no applications to split")
    ordered = sorted(set(pairs))
    n_train, n_valid = split_counts(len(ordered), train_frac, valid_frac)
    out: dict[str, str] = {}
    for i, (_, app_id) in enumerate(ordered):
        if i < n_train:
            out[app_id] = "train"
        elif i < n_train + n_valid:
            out[app_id] = "valid"
        else:
            out[app_id] = "test"
    return out


def split_by_date(
    apps: Sequence[Application], train_frac: float, valid_frac: float
) -> DatasetSplit:
    """Sort by (filing_date, application_id) and cut train/valid/test.

    Training always uses the oldest applications so evaluation mimics
    predicting on unseen, more recent filings.
    """
    if not apps:
        raise EmptyInput("no applications to split")
    assignment = split_application_ids(
        [(a.filing_date, a.application_id) for a in apps], train_frac, valid_frac
    )
    ordered = sorted(apps, key=lambda a: (a.filing_date, a.application_id))
    parts = {"train": [], "valid": [], "test": []}
    for app in ordered:
        parts[assignment[app.application_id]].append(app)
    return DatasetSplit(
        train=tuple(parts["train"]),
        valid=tuple(parts["valid"]),
        test=tuple(parts["test"]),
    )


@dataclass(frozen=True)
class FeatureStore:
    """Opaque per-claim feature vectors (novelty scores, citations, ...)."""

    dim: int
    vectors: dict[tuple[str, int], np.ndarray]

    def get(self, application_id: str, claim_number: int) -> np.ndarray:
        key = (application_id, claim_number)
        if key not in self.vectors:
            raise KeyError(f"no feature vector for {key}")
        return self.vectors[key]

    def __len__(self) -> int:
        return len(self.vectors)


def load_features(path: str | Path) -> FeatureStore:
    """JSONL of {"application_id", "claim_number", "vec": [...]}, uniform length."""
    path = Path(path)
    dim: int | None = None
    vectors: dict[tuple[str, int], np.ndarray] = {}
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (rec["application_id"], int(rec["claim_number"]))
                vec = np.asarray(rec["vec"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(exc), lineno) from exc
            if vec.ndim != 1 or not np.all(np.isfinite(vec)):
                raise DimMismatch(f"line {lineno}: vector must be 1-d and finite")
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise DimMismatch(f"line {lineno}: dim {len(vec)} != {dim}")
            if key in vectors:
                raise DuplicateKey(f"line {lineno}: duplicate key {key}")
            vectors[key] = vec
    return FeatureStore(dim=dim or 0, vectors=vectors)


@dataclass(frozen=True)
class CorpusStats:
    claims: int
    applications: int
    approval_pct: float
    mean_claims_per_application: float

    def to_dict(self) -> dict:
        return {
            "claims": self.claims,
            "applications": self.applications,
            "approval_pct": round(self.approval_pct, 2),
            "mean_claims_per_application": round(self.mean_claims_per_application, 2),
        }


def corpus_stats(apps: Sequence[Application]) -> CorpusStats:
    """Claim/application counts and approval percentage; labels required."""
    if not apps:
        raise EmptyInput("no applications")
    claims = 0
    approved = 0
    for app in apps:
        for claim in app.claims:
            if claim.label is None:
                raise InvariantViolation(
                    f"{app.application_id} claim {claim.number}: label missing"
                )
            claims += 1
            approved += claim.label
    return CorpusStats(
        claims=claims,
        applications=len(apps),
        approval_pct=100.0 * approved / claims,
        mean_claims_per_application=claims / len(apps),
    )
