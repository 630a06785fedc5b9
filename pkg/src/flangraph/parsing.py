"""Rule-based decomposition of patent claims.

Claims follow a rigid register: a preamble, a "patentese" conjunction such as
"comprising" or "configured to", then an itemized body where colons open a
sub-level and semicolons separate siblings.  Dependent claims open with a
reference ("The system of claim 1, ...").  All of that is regular enough to
segment with regexes and closed word lists; no tagger or grammar is involved,
which keeps the whole parse deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EmptySegment, MalformedReference, NoIdentity
from .model import Claim, ClaimSegment, Identity, SegmentKind

# Conjunctions that signal hierarchy.  They only split a claim when followed
# by a colon or an itemized (semicolon) list; see segment_claim.
HIERARCHY_CONJUNCTIONS = (
    "consisting of",
    "consists of",
    "configured to",
    "comprising",
    "comprises",
    "including",
    "includes",
    "having",
    "has",
    "whereby",
    "wherein",
    "where",
)

# Subset strong enough to split the body of a dependent claim without any
# colon ("... where the authentication component includes a terminal ...").
# "has"/"having"/"where" are excluded: they appear constantly as ordinary
# grammar ("the user has moved") and would shred the text.
_STRONG = re.compile(
    r"\b(consisting\s+of|consists\s+of|configured\s+to|comprising|comprises|including|includes)\b",
    re.IGNORECASE,
)

_CONJ = re.compile(
    r"\b(" + "|".join(c.replace(" ", r"\s+") for c in HIERARCHY_CONJUNCTIONS) + r")\b",
    re.IGNORECASE,
)

# "<np> of claim N" / "according to claim N", optionally listing several
# numbers ("claim 1 or 2", "claims 1-3").
_REF_PHRASE = re.compile(
    r"\b(?:of|according\s+to)\s+(?:any\s+(?:one\s+)?of\s+)?claims?\s+"
    r"(\d+(?:\s*(?:,|or|and|to|through|[-–])\s*(?:claims?\s+)?\d+)*)",
    re.IGNORECASE,
)
_REF_HINT = re.compile(r"\b(?:of|according\s+to)\s+claims?\b", re.IGNORECASE)

_TOKEN = re.compile(r"[A-Za-z0-9][A-Za-z0-9'\-]*")

# Leading tokens skipped before a noun phrase starts.
_LEADING_SKIP = frozenset(
    "a an the said its their this that these those each every such any some "
    "one two three or more at least also further of to and".split()
)

# Tokens that end a noun phrase.
_STOP = frozenset(
    # prepositions / conjunctions
    "of for to from in on at with within by as into onto over under between "
    "through during against about toward towards upon per via and or but nor "
    # auxiliaries and copulas
    "is are was were be been being am do does did has have had will would "
    "shall should may might can could must "
    # relatives and clause markers
    "that which who whom whose when while if whether "
    # patentese markers
    "where wherein whereby comprising comprises consisting consists "
    "including includes having configured adapted arranged operable".split()
)

# Closed verb list for verbal identities ("receive authentication
# information").  Checked only at the start of a segment, where patent
# sub-components state their function in base form.
VERB_LEXICON = frozenset(
    "receive deliver use compare include transmit send store provide generate "
    "display determine authenticate track assess recognize monitor record "
    "detect measure compute calculate control engage identify authorize "
    "process output select apply perform obtain establish maintain produce "
    "create cause enable communicate present report notify verify validate "
    "encrypt decrypt route schedule allocate assign update retrieve access "
    "capture".split()
)

# Unambiguous verbs also act as noun-phrase stoppers when scanning mentions;
# nouns like "control"/"display" must not (think "control component").
_VERB_STOP = frozenset(
    "receive deliver use compare transmit send provide generate determine "
    "authenticate assess recognize detect compute calculate engage authorize "
    "select apply perform obtain establish maintain produce create cause "
    "enable communicate notify verify validate encrypt decrypt retrieve "
    "update capture".split()
)

_NORMALIZE_DROP = frozenset("a an the said its their".split())


@dataclass(frozen=True)
class ParsedClaim:
    """A claim split into preamble and component segments.

    ``components`` is the component tree flattened in pre-order; each
    segment's parent is the nearest preceding segment one level up (the
    preamble for level-1 components).
    """

    claim_number: int
    reference: int | None
    preamble: ClaimSegment
    components: tuple[ClaimSegment, ...]
    raw_text: str

    def __post_init__(self):
        if self.reference is not None and self.reference >= self.claim_number:
            raise MalformedReference(
                f"claim {self.claim_number} references claim {self.reference}"
            )
        prev_level = 0
        for seg in self.components:
            if seg.level < 1 or seg.level > prev_level + 1:
                raise EmptySegment(
                    f"claim {self.claim_number}: level jump {prev_level} -> {seg.level}"
                )
            prev_level = seg.level

    def to_dict(self) -> dict:
        return {
            "claim_number": self.claim_number,
            "reference": self.reference,
            "preamble": self.preamble.to_dict(),
            "components": [c.to_dict() for c in self.components],
            "raw_text": self.raw_text,
        }


@dataclass
class ParseWarnings:
    """Soft anomalies collected during a parse, for operator reports."""

    events: list[str] = field(default_factory=list)

    def add(self, message: str) -> None:
        self.events.append(message)


def _tokens_with_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN.finditer(text)]


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; punctuation peeled, hyphens kept inside."""
    return [t.lower() for t, _, _ in _tokens_with_spans(text)]


def strip_plural(token: str) -> str:
    # Plural stripping only applies while matching; "has" and friends never
    # reach here because they are function words.
    if len(token) > 3 and token.endswith("s") and not token.endswith("ss"):
        return token[:-1]
    return token


def detect_reference(text: str, warnings: ParseWarnings | None = None) -> int | None:
    """Return the claim number a dependent claim opens with, if any.

    Only the first clause counts: everything before the first comma or the
    first hierarchy conjunction.  "claim 1 or 2" style lists resolve to the
    smallest number (the most general ancestor) with a warning.
    """
    if not text.strip():
        raise MalformedReference("empty claim text")
    end = len(text)
    comma = text.find(",")
    if comma != -1:
        end = comma
    conj = _CONJ.search(text)
    if conj and conj.start() < end:
        end = conj.start()
    clause = text[:end]
    m = _REF_PHRASE.search(clause)
    if not m:
        if _REF_HINT.search(clause):
            raise MalformedReference(f"reference pattern without a claim number: {clause!r}")
        return None
    numbers = [int(n) for n in re.findall(r"\d+", m.group(1))]
    if min(numbers) < 1:
        raise MalformedReference(f"claim number must be positive in {m.group(0)!r}")
    if len(set(numbers)) > 1 and warnings is not None:
        warnings.add(
            f"multi-reference {sorted(set(numbers))}; taking smallest {min(numbers)}"
        )
    return min(numbers)


def strip_reference_clause(text: str) -> str:
    """Drop the leading reference clause ("The system of claim 1,")."""
    m = _REF_PHRASE.search(text)
    if m is None or m.start() > 120:
        return text
    return text[m.end():].lstrip(" \t,;").strip()


def _trim_segment(text: str) -> str:
    text = text.strip().strip(",;:").strip()
    lowered = text.lower()
    for connective in ("and ", "or "):
        if lowered.startswith(connective):
            text = text[len(connective):].lstrip()
            lowered = text.lower()
    return text.strip()


def _find_split_conjunction(text: str) -> tuple[int, int] | None:
    """First hierarchy conjunction followed by a colon, else (if the text has
    an itemized list at all) the first conjunction preceding a semicolon."""
    for m in _CONJ.finditer(text):
        rest = text[m.end():].lstrip()
        if rest.startswith(":"):
            colon = text.index(":", m.end())
            return m.start(), colon + 1
    if ";" in text:
        for m in _CONJ.finditer(text):
            if ";" in text[m.end():]:
                return m.start(), m.end()
    return None


def segment_claim(text: str) -> ParsedClaim:
    """Split a claim into preamble and a level-ordered component tree.

    Rules, in priority order: a hierarchy conjunction immediately followed by
    a colon or an itemized list ends the preamble; colons open a child level;
    semicolons separate siblings; the terminal period closes all levels.
    A claim where no conjunction fires is inner-dependency-free: the whole
    text is the preamble.  Zero-length components signal malformed
    punctuation and demote the claim to inner-dependency-free as well.

    The claim number is not known here; ``parse`` fills it in.  Returned
    segments carry no identities yet.
    """
    if not text or not text.strip():
        raise EmptySegment("empty claim text")

    split = _find_split_conjunction(text)
    whole = ClaimSegment(text.strip(), 0, SegmentKind.PREAMBLE, span=(0, len(text)))
    if split is None:
        return ParsedClaim(0x7FFFFFFF, None, whole, (), text)

    _, body_start = split
    preamble = ClaimSegment(
        text[:body_start].strip(), 0, SegmentKind.PREAMBLE, span=(0, body_start)
    )
    try:
        components = _scan_body(text, body_start)
    except EmptySegment:
        return ParsedClaim(0x7FFFFFFF, None, whole, (), text)
    if len(components) <= 1:
        # A single entity/feature does not make an inner hierarchy.
        return ParsedClaim(0x7FFFFFFF, None, whole, (), text)
    return ParsedClaim(0x7FFFFFFF, None, preamble, tuple(components), text)


def _scan_body(text: str, start: int) -> list[ClaimSegment]:
    """Walk the body character-wise, emitting components with levels."""
    components: list[ClaimSegment] = []
    level = 1
    seg_start = start
    i = start
    n = len(text)

    def emit(end: int, lvl: int) -> None:
        raw = text[seg_start:end]
        trimmed = _trim_segment(raw)
        if not trimmed:
            raise EmptySegment(f"zero-length component at offset {seg_start}")
        components.append(
            ClaimSegment(trimmed, lvl, SegmentKind.COMPONENT, span=(seg_start, end))
        )

    while i < n:
        ch = text[i]
        if ch == ":":
            emit(i, level)
            level += 1
            seg_start = i + 1
        elif ch == ";":
            emit(i, level)
            seg_start = i + 1
        elif ch == "." and not text[i + 1:].strip():
            # Terminal period only; mid-text dots (e.g. "1.5") pass through.
            emit(i + 1, level)
            seg_start = i + 1
            break
        i += 1
    if text[seg_start:].strip():
        emit(n, level)
    return components


def _noun_phrase(tokens: list[tuple[str, int, int]], start: int) -> tuple[list[str], int, int] | None:
    """Scan for the next maximal noun phrase; returns (tokens, first, last) indices."""
    i = start
    while i < len(tokens):
        tok = tokens[i][0].lower()
        if tok in _LEADING_SKIP or tok in _STOP or tok in _VERB_STOP:
            i += 1
            continue
        break
    if i >= len(tokens):
        return None
    collected = [tokens[i][0].lower()]
    first = i
    i += 1
    while i < len(tokens):
        tok = tokens[i][0].lower()
        if tok in _STOP or tok in _VERB_STOP or tok in _LEADING_SKIP:
            break
        if tok.endswith("ing") or tok.endswith("ed"):
            # Trailing participles ("cameras positioned ...") end the phrase;
            # a leading one ("tracking component") is part of the name.
            break
        collected.append(tok)
        i += 1
    return collected, first, i - 1


def _normalize_phrase(tokens: list[str]) -> str:
    kept = [t for t in tokens if t not in _NORMALIZE_DROP]
    return " ".join(kept)


def extract_identity(segment_text: str, level: int) -> Identity:
    """Pull the anchor phrase out of a segment.

    Verbal segments ("receive authentication information from ...") yield
    verb + first object noun phrase; anything else yields the first maximal
    noun phrase after the claim-reference prefix is stripped.
    """
    if not segment_text.strip():
        raise NoIdentity("empty segment")
    text = _REF_PHRASE.sub(" ", segment_text)
    toks = _tokens_with_spans(text)

    # Skip leading connectives / clause markers to find the first content token.
    i = 0
    while i < len(toks) and toks[i][0].lower() in _LEADING_SKIP | {"where", "wherein", "whereby"}:
        i += 1
    if i >= len(toks):
        raise NoIdentity(f"no content tokens in {segment_text!r}")

    head = toks[i][0].lower()
    if head in VERB_LEXICON:
        np = _noun_phrase(toks, i + 1)
        if np is None:
            raise NoIdentity(f"verbal segment without object: {segment_text!r}")
        np_tokens, _, last = np
        surface = text[toks[i][1]:toks[last][2]].strip()
        normalized = _normalize_phrase([head] + np_tokens)
        return Identity(surface=surface, normalized=normalized, level=level)

    np = _noun_phrase(toks, i)
    if np is None:
        raise NoIdentity(f"no noun phrase in {segment_text!r}")
    np_tokens, first, last = np
    surface = text[toks[first][1]:toks[last][2]].strip()
    normalized = _normalize_phrase(np_tokens)
    if not normalized:
        raise NoIdentity(f"no noun phrase in {segment_text!r}")
    return Identity(surface=surface, normalized=normalized, level=level)


@dataclass(frozen=True)
class Mention:
    """A noun phrase occurring in a preamble, used to score anchor candidates."""

    tokens: tuple[str, ...]
    where_led: bool

    @property
    def match_tokens(self) -> tuple[str, ...]:
        return tuple(strip_plural(t) for t in self.tokens)


def extract_mentions(preamble_text: str) -> list[Mention]:
    """All noun phrases after the reference phrase, with where/wherein flags."""
    text = _REF_PHRASE.sub(" ", preamble_text)
    toks = _tokens_with_spans(text)
    mentions: list[Mention] = []
    i = 0
    where_pending = False
    while i < len(toks):
        tok = toks[i][0].lower()
        if tok in ("where", "wherein"):
            where_pending = True
            i += 1
            continue
        if tok in _LEADING_SKIP or tok in _STOP or tok in _VERB_STOP:
            i += 1
            continue
        np = _noun_phrase(toks, i)
        if np is None:
            break
        np_tokens, _, last = np
        mentions.append(Mention(tokens=tuple(np_tokens), where_led=where_pending))
        where_pending = False
        i = last + 1
    return mentions


def split_dependent_body(body: str, max_depth: int = 6) -> list[str]:
    """Chain-split a dependent claim body at strong conjunctions.

    "where the authentication component includes a terminal configured to
    authenticate ..." becomes three chained segments, reproducing the
    narrowing structure the claim expresses without any colon itemization.
    Returns parent-first; a body with no strong conjunction stays whole.
    """
    parts: list[str] = []
    rest = body.strip()
    while rest and len(parts) < max_depth:
        m = _STRONG.search(rest)
        if m is None:
            break
        head = rest[:m.end()].strip()
        tail = rest[m.end():].strip()
        head_content = [
            t for t in tokenize(head[:m.start()]) if t not in _LEADING_SKIP and t not in _STOP
        ]
        if not head_content or not tail:
            # Conjunction with nothing of substance before (or after) it;
            # keep scanning past it rather than emitting a hollow node.
            nxt = _STRONG.search(rest, m.end())
            if nxt is None or not tail:
                break
            m = nxt
            head = rest[:m.end()].strip()
            tail = rest[m.end():].strip()
            if not tail:
                break
        parts.append(head)
        rest = tail
    if rest:
        parts.append(rest)
    return parts if parts else [body.strip()]


def _attach_identities(
    parsed: ParsedClaim, warnings: ParseWarnings | None
) -> ParsedClaim:
    def resolve(seg: ClaimSegment) -> ClaimSegment:
        try:
            return seg.with_identity(extract_identity(seg.text, seg.level))
        except NoIdentity:
            if warnings is not None:
                warnings.add(f"no identity for segment {seg.text[:40]!r}")
            return seg

    return ParsedClaim(
        claim_number=parsed.claim_number,
        reference=parsed.reference,
        preamble=resolve(parsed.preamble),
        components=tuple(resolve(c) for c in parsed.components),
        raw_text=parsed.raw_text,
    )


def parse(claim: Claim, warnings: ParseWarnings | None = None) -> ParsedClaim:
    """Full parse: reference detection, segmentation, identity extraction.

    Pure function of the claim; identical input gives an identical parse.
    """
    reference = detect_reference(claim.text, warnings)
    skeleton = segment_claim(claim.text)
    parsed = ParsedClaim(
        claim_number=claim.number,
        reference=reference,
        preamble=skeleton.preamble,
        components=skeleton.components,
        raw_text=claim.text,
    )
    return _attach_identities(parsed, warnings)
