"""Synthetic corpora for tests and the end-to-end experiment.

Two generators, both deterministic from a seed:

* ``gen_signal_corpus`` builds applications whose labels depend on a marker
  token planted in one component of the independent claim.  Dependent claims
  never mention the marker themselves, so a model that sees only the claim's
  own text has nothing to learn from, while a model that inherits ancestor
  nodes does.  This realizes the ordering the full corpus shows between the
  claim-graph pipeline and the single-node ablation.

* ``gen_structural_corpus`` stresses the parser and graph builder with
  irregular shapes: deep reference chains, bodies without conjunctions,
  multi-number references, preambles that match nothing.
"""

from __future__ import annotations

import datetime

import numpy as np

from .model import Application, Claim

_KINDS = (
    "routing", "metering", "storage", "control", "display",
    "sensor", "gateway", "scheduling",
)
_VERBS = (
    "receive", "transmit", "store", "compare", "deliver",
    "generate", "monitor", "record",
)
_NOUNS = (
    "status frames", "location updates", "access codes", "event records",
    "telemetry packets", "user credentials", "command digests", "signal estimates",
)
_ADJS = (
    "periodic", "encoded", "buffered", "filtered",
    "compressed", "indexed", "archived", "rotating",
)
_DOMAINS = (
    "managing inventory", "controlling access", "routing shipments",
    "dispatching vehicles", "scheduling maintenance", "tracking assets",
)

# The label-carrying token.  It appears only inside the independent claim's
# marked component, never in any dependent claim text.
MARKER = "notarized"


def _date(start: str, offset_days: int) -> str:
    base = datetime.date.fromisoformat(start)
    return (base + datetime.timedelta(days=offset_days)).isoformat()


def _phrase(rng: np.random.Generator, marked: bool = False) -> str:
    verb = rng.choice(_VERBS)
    adj = MARKER if marked else rng.choice(_ADJS)
    noun = rng.choice(_NOUNS)
    return f"{verb} {adj} {noun}"


def _independent_claim(rng: np.random.Generator, kinds: list[str], marked_slot: int, marked: bool) -> str:
    """Three components; the third carries a nested sub-list.  Slot 2 plants
    the marker two hops from the root, exercising multi-layer propagation."""
    domain = rng.choice(_DOMAINS)
    p0 = _phrase(rng, marked=marked and marked_slot == 0)
    p1 = _phrase(rng, marked=marked and marked_slot == 1)
    sub_a = _phrase(rng, marked=marked and marked_slot == 2)
    sub_b = _phrase(rng)
    return (
        f"A system for {domain}, the system comprising: "
        f"a {kinds[0]} component configured to {p0}; "
        f"a {kinds[1]} component configured to {p1}; "
        f"and a {kinds[2]} component configured to: {sub_a}; and {sub_b}."
    )


def gen_signal_corpus(
    n_apps: int,
    seed: int = 0,
    start_date: str = "2018-01-01",
    claims_per_app: tuple[int, int] = (6, 10),
) -> list[Application]:
    """Applications where every claim's label equals the marker's presence."""
    rng = np.random.default_rng(seed)
    apps = []
    for idx in range(n_apps):
        marked = bool(rng.random() < 0.5)
        label = 1 if marked else 0
        kinds = list(rng.choice(_KINDS, size=3, replace=False))
        marked_slot = int(rng.integers(0, 3))
        claims = [Claim(number=1, text=_independent_claim(rng, kinds, marked_slot, marked), label=label)]
        n_claims = int(rng.integers(claims_per_app[0], claims_per_app[1] + 1))
        for number in range(2, n_claims + 1):
            # Reference claim 1 mostly, sometimes chain off an earlier claim.
            ref = 1 if rng.random() < 0.7 else int(rng.integers(1, number))
            kind = rng.choice(kinds)
            if rng.random() < 0.25:
                adj = rng.choice(_ADJS)
                noun = rng.choice(_NOUNS).split()[-1]
                text = (
                    f"The system of claim {ref}, where the {kind} component "
                    f"includes a {adj} {noun} module."
                )
            else:
                text = (
                    f"The system of claim {ref}, where the {kind} component is "
                    f"configured to {_phrase(rng)}."
                )
            claims.append(Claim(number=number, text=text, label=label))
        apps.append(
            Application(
                application_id=f"APP{idx:05d}",
                filing_date=_date(start_date, idx),
                claims=tuple(claims),
            )
        )
    return apps


def _structural_independent(rng: np.random.Generator) -> str:
    style = rng.random()
    kinds = rng.choice(_KINDS, size=3, replace=False)
    if style < 0.2:
        # No inner hierarchy at all.
        return f"A device for {rng.choice(_DOMAINS)} with a single {kinds[0]} unit."
    if style < 0.4:
        # Itemized list without a colon.
        return (
            f"An apparatus comprising a {kinds[0]} component; "
            f"a {kinds[1]} component; and a {kinds[2]} component."
        )
    parts = [
        f"a {kind} component configured to {_phrase(rng)}" for kind in kinds
    ]
    if rng.random() < 0.5:
        parts[-1] += f" configured to: {_phrase(rng)}; and {_phrase(rng)}"
        parts[-1] = parts[-1].replace(" configured to ", " adapted to ", 1)
    body = "; ".join(parts)
    return f"A system for {rng.choice(_DOMAINS)}, the system comprising: {body}."


def _structural_dependent(rng: np.random.Generator, number: int) -> tuple[str, int]:
    style = rng.random()
    ref = int(rng.integers(1, number))
    kind = rng.choice(_KINDS)
    if style < 0.15:
        # Multi-number reference; smallest wins.
        other = int(rng.integers(1, number))
        lo, hi = sorted((ref, other))
        text = f"The system of claim {hi} or claim {lo}, wherein the {kind} component is {rng.choice(_ADJS)}."
        return text, lo
    if style < 0.3:
        text = f"The system according to claim {ref}, where the {kind} component includes a {rng.choice(_ADJS)} liner."
        return text, ref
    if style < 0.45:
        # Colon-itemized dependent body.
        text = (
            f"The system of claim {ref}, where the {kind} component is configured to: "
            f"{_phrase(rng)}; and {_phrase(rng)}."
        )
        return text, ref
    if style < 0.6:
        # Preamble that matches no inherited identity: root fallback.
        text = f"The system of claim {ref}, where the flux manifold is {rng.choice(_ADJS)}."
        return text, ref
    if style < 0.75:
        # No conjunction in the body at all.
        text = f"The system of claim {ref}, where the {kind} component is {rng.choice(_ADJS)}."
        return text, ref
    text = f"The system of claim {ref}, where the {kind} component is configured to {_phrase(rng)}."
    return text, ref


def gen_structural_corpus(
    n_apps: int, seed: int = 0, start_date: str = "2018-01-01"
) -> list[Application]:
    """Irregular applications exercising every builder code path."""
    rng = np.random.default_rng(seed)
    apps = []
    for idx in range(n_apps):
        n_claims = int(rng.integers(3, 9))
        claims = [
            Claim(number=1, text=_structural_independent(rng), label=int(rng.integers(0, 2)))
        ]
        for number in range(2, n_claims + 1):
            text, _ = _structural_dependent(rng, number)
            claims.append(Claim(number=number, text=text, label=int(rng.integers(0, 2))))
        apps.append(
            Application(
                application_id=f"SYN{idx:05d}",
                filing_date=_date(start_date, idx % 1500),
                claims=tuple(claims),
            )
        )
    return apps
