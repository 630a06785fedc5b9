"""Core domain types: applications, claims, segments, identities, splits.

Everything here is immutable after construction and validated eagerly, so
later stages never have to re-check basics like label values or date formats.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvariantViolation


class SegmentKind(str, Enum):
    PREAMBLE = "preamble"
    COMPONENT = "component"


@dataclass(frozen=True)
class Identity:
    """Anchor phrase extracted from a claim segment, used for node matching."""

    surface: str
    normalized: str
    level: int

    _STRIP = ("a", "an", "the", "said", "its", "their")

    def __post_init__(self):
        if not self.normalized:
            raise InvariantViolation("identity normalized form is empty")
        head = self.normalized.split(" ", 1)[0]
        if head in self._STRIP:
            raise InvariantViolation(f"identity not normalized: leading {head!r}")
        if self.level < 0:
            raise InvariantViolation("identity level must be >= 0")

    def to_dict(self) -> dict:
        return {"surface": self.surface, "normalized": self.normalized, "level": self.level}

    @classmethod
    def from_dict(cls, d: dict) -> "Identity":
        return cls(surface=d["surface"], normalized=d["normalized"], level=d["level"])


@dataclass(frozen=True)
class ClaimSegment:
    """One piece of a decomposed claim: the preamble or a component.

    ``span`` holds (start, end) character offsets into the raw claim text so
    the segmentation can be checked to cover the input exactly.
    """

    text: str
    level: int
    kind: SegmentKind
    identity: Identity | None = None
    span: tuple[int, int] | None = None

    def __post_init__(self):
        if self.level < 0:
            raise InvariantViolation("segment level must be >= 0")
        if self.kind == SegmentKind.PREAMBLE and self.level != 0:
            raise InvariantViolation("preamble must sit at level 0")

    def with_identity(self, identity: Identity | None) -> "ClaimSegment":
        return ClaimSegment(self.text, self.level, self.kind, identity, self.span)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "level": self.level,
            "kind": self.kind.value,
            "identity": self.identity.to_dict() if self.identity else None,
        }


def _validate_date(value: str) -> str:
    try:
        datetime.date.fromisoformat(value)
    except (TypeError, ValueError) as exc:
        raise InvariantViolation(f"filing_date {value!r} is not ISO-8601") from exc
    return value


@dataclass(frozen=True)
class Claim:
    """A single numbered claim with an optional approval label (1 = approved)."""

    number: int
    text: str
    label: int | None = None

    def __post_init__(self):
        if self.number < 1:
            raise InvariantViolation(f"claim number must be positive, got {self.number}")
        if not self.text or not self.text.strip():
            raise InvariantViolation(f"claim {self.number} has empty text")
        if self.label is not None and self.label not in (0, 1):
            raise InvariantViolation(f"claim {self.number} label must be 0 or 1, got {self.label}")

    def to_dict(self) -> dict:
        d: dict = {"number": self.number, "text": self.text}
        if self.label is not None:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Claim":
        return cls(number=d["number"], text=d["text"], label=d.get("label"))


@dataclass(frozen=True)
class Application:
    """A patent application: id, filing date, and its claims in number order.

    Claims may arrive in any order; they are stored sorted.  Duplicate claim
    numbers are an error, not something to repair silently.
    """

    application_id: str
    filing_date: str
    claims: tuple[Claim, ...]

    def __post_init__(self):
        if not self.application_id:
            raise InvariantViolation("application_id is empty")
        _validate_date(self.filing_date)
        ordered = tuple(sorted(self.claims, key=lambda c: c.number))
        numbers = [c.number for c in ordered]
        if len(set(numbers)) != len(numbers):
            dupes = sorted({n for n in numbers if numbers.count(n) > 1})
            raise InvariantViolation(
                f"application {self.application_id}: duplicate claim numbers {dupes}"
            )
        object.__setattr__(self, "claims", ordered)

    def claim(self, number: int) -> Claim:
        for c in self.claims:
            if c.number == number:
                return c
        raise KeyError(number)

    def to_dict(self) -> dict:
        return {
            "application_id": self.application_id,
            "filing_date": self.filing_date,
            "claims": [c.to_dict() for c in self.claims],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Application":
        return cls(
            application_id=d["application_id"],
            filing_date=d["filing_date"],
            claims=tuple(Claim.from_dict(c) for c in d["claims"]),
        )

    @classmethod
    def from_json(cls, s: str) -> "Application":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class DatasetSplit:
    """Time-ordered train/valid/test partition of applications."""

    train: tuple[Application, ...]
    valid: tuple[Application, ...]
    test: tuple[Application, ...] = field(default=())

    def __post_init__(self):
        parts = (self.train, self.valid, self.test)
        ids = [a.application_id for part in parts for a in part]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("split parts are not disjoint")
        for earlier, later in ((self.train, self.valid), (self.valid, self.test)):
            if earlier and later:
                last = max((a.filing_date, a.application_id) for a in earlier)
                first = min((a.filing_date, a.application_id) for a in later)
                if last > first:
                    raise InvariantViolation("split violates filing-date ordering")

    def __len__(self) -> int:
        return len(self.train) + len(self.valid) + len(self.test)
