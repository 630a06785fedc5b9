"""Per-claim dependency graphs and the two ablation structures.

Every claim gets its own graph.  An independent claim contributes a root node
(from the preamble) plus one node per component.  A dependent claim inherits a
deep copy of the referenced claim's graph and attaches its new nodes under the
best-matching inherited node, so a graph carries text from the whole ancestor
chain.  Edges always point leaf -> root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .errors import InvariantViolation, MissingAncestor, NoIdentity
from .model import ClaimSegment, Identity
from .parsing import (
    Mention,
    ParsedClaim,
    ParseWarnings,
    extract_identity,
    extract_mentions,
    split_dependent_body,
    strip_plural,
    strip_reference_clause,
)


@dataclass(frozen=True)
class FlanNode:
    node_id: int
    text: str
    identity: Identity | None
    level: int
    origin_claim: int
    is_target: bool
    is_root: bool

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "text": self.text,
            "identity": self.identity.to_dict() if self.identity else None,
            "level": self.level,
            "origin_claim": self.origin_claim,
            "is_target": self.is_target,
            "is_root": self.is_root,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlanNode":
        ident = d.get("identity")
        return cls(
            node_id=d["node_id"],
            text=d["text"],
            identity=Identity.from_dict(ident) if ident else None,
            level=d["level"],
            origin_claim=d["origin_claim"],
            is_target=d["is_target"],
            is_root=d["is_root"],
        )


@dataclass(frozen=True)
class FlanGraph:
    """Directed in-tree over claim segments; edges run leaf -> root."""

    claim_number: int
    nodes: tuple[FlanNode, ...]
    edges: tuple[tuple[int, int], ...]

    @property
    def root(self) -> FlanNode:
        for node in self.nodes:
            if node.is_root:
                return node
        raise InvariantViolation(f"graph for claim {self.claim_number} has no root")

    @property
    def targets(self) -> tuple[FlanNode, ...]:
        return tuple(n for n in self.nodes if n.is_target)

    def node(self, node_id: int) -> FlanNode:
        return self.nodes[node_id]

    def to_dict(self) -> dict:
        return {
            "claim_number": self.claim_number,
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlanGraph":
        return cls(
            claim_number=d["claim_number"],
            nodes=tuple(FlanNode.from_dict(n) for n in d["nodes"]),
            edges=tuple((e[0], e[1]) for e in d["edges"]),
        )


def validate_graph(graph: FlanGraph) -> None:
    """Check the in-tree invariants; raises InvariantViolation on any breach."""
    n = len(graph.nodes)
    if n == 0:
        raise InvariantViolation("graph has no nodes")
    for i, node in enumerate(graph.nodes):
        if node.node_id != i:
            raise InvariantViolation("node ids must be dense and ordered")
        if node.is_target != (node.origin_claim == graph.claim_number):
            raise InvariantViolation(f"node {i}: target flag disagrees with origin")
    roots = [node for node in graph.nodes if node.is_root]
    if len(roots) != 1:
        raise InvariantViolation(f"expected exactly one root, found {len(roots)}")
    root_id = roots[0].node_id

    out: dict[int, int] = {}
    for frm, to in graph.edges:
        if not (0 <= frm < n and 0 <= to < n):
            raise InvariantViolation(f"edge ({frm},{to}) out of range")
        if frm in out:
            raise InvariantViolation(f"node {frm} has more than one outgoing edge")
        out[frm] = to
    if root_id in out:
        raise InvariantViolation("root must have no outgoing edge")
    for node in graph.nodes:
        if node.node_id != root_id and node.node_id not in out:
            raise InvariantViolation(f"node {node.node_id} is disconnected from the root")
    if len(graph.edges) != n - 1:
        raise InvariantViolation(f"in-tree needs {n - 1} edges, found {len(graph.edges)}")
    # Following parents must terminate at the root (acyclicity).
    for start in range(n):
        seen = set()
        cur = start
        while cur != root_id:
            if cur in seen:
                raise InvariantViolation(f"cycle reachable from node {start}")
            seen.add(cur)
            cur = out[cur]
    if not graph.targets:
        raise InvariantViolation("graph has no target nodes")


@dataclass(frozen=True)
class MatchResult:
    node_id: int
    score: int
    fallback: bool
    mention: Mention | None = None


def _identity_match_tokens(identity: Identity) -> tuple[str, ...]:
    return tuple(strip_plural(t) for t in identity.normalized.split())


def _score(mention: Mention, identity_tokens: tuple[str, ...]) -> int:
    m = mention.match_tokens
    if m == identity_tokens:
        return 2
    a, b = set(m), set(identity_tokens)
    union = a | b
    if union and len(a & b) / len(union) >= 0.5:
        return 1
    return 0


def match_preamble(preamble: ClaimSegment, candidates: Sequence[FlanNode]) -> MatchResult:
    """Pick the inherited node a dependent claim attaches to.

    Every noun phrase in the preamble (reference phrase removed) is scored
    against every candidate identity: 2 for an exact normalized match, 1 for
    token-Jaccard >= 0.5.  Ties break toward the deepest node, then toward
    mentions introduced by "where"/"wherein", then the smallest node id.
    When nothing scores, the root wins and the result is flagged as a
    fallback.
    """
    if not candidates:
        raise InvariantViolation("match_preamble needs candidates")
    mentions = extract_mentions(preamble.text)
    best: tuple[int, int, int, int] | None = None  # score, level, where, -id
    best_node: FlanNode | None = None
    best_mention: Mention | None = None
    for node in candidates:
        if node.identity is None:
            continue
        ident_tokens = _identity_match_tokens(node.identity)
        for mention in mentions:
            score = _score(mention, ident_tokens)
            if score == 0:
                continue
            key = (score, node.level, 1 if mention.where_led else 0, -node.node_id)
            if best is None or key > best:
                best = key
                best_node = node
                best_mention = mention
    if best_node is None:
        root = next(n for n in candidates if n.is_root)
        return MatchResult(root.node_id, 0, fallback=True)
    return MatchResult(best_node.node_id, best[0], fallback=False, mention=best_mention)


def _component_parents(components: Sequence[ClaimSegment]) -> list[int]:
    """Index of each pre-order component's parent; -1 for level-1 components."""
    parents: list[int] = []
    stack: list[int] = []  # indices of the current ancestor chain
    for i, seg in enumerate(components):
        while len(stack) >= seg.level:
            stack.pop()
        parents.append(stack[-1] if stack else -1)
        stack.append(i)
    return parents


def _copy_inherited(graph: FlanGraph) -> tuple[list[FlanNode], list[tuple[int, int]]]:
    nodes = [replace(node, is_target=False) for node in graph.nodes]
    return nodes, list(graph.edges)


def _identity_or_none(text: str, level: int) -> Identity | None:
    try:
        return extract_identity(text, level)
    except NoIdentity:
        return None


def build_flan_graph(
    parsed: ParsedClaim,
    ancestors: Mapping[int, FlanGraph],
    warnings: ParseWarnings | None = None,
) -> FlanGraph:
    """Build the dependency graph for one parsed claim.

    ``ancestors`` must already contain the referenced claim's graph; legal
    claims only reference earlier numbers, so building in claim-number order
    always satisfies this.
    """
    claim = parsed.claim_number
    if parsed.reference is None:
        return _build_independent(parsed)

    parent = ancestors.get(parsed.reference)
    if parent is None:
        raise MissingAncestor(
            f"claim {claim} references claim {parsed.reference}, whose graph is unavailable"
        )
    nodes, edges = _copy_inherited(parent)
    match = match_preamble(parsed.preamble, nodes)
    if match.fallback and warnings is not None:
        warnings.add(f"claim {claim}: preamble matched nothing, attached to root")
    anchor = nodes[match.node_id]

    def add_node(text: str, level: int, parent_id: int) -> int:
        node_id = len(nodes)
        nodes.append(
            FlanNode(
                node_id=node_id,
                text=text,
                identity=_identity_or_none(text, level),
                level=level,
                origin_claim=claim,
                is_target=True,
                is_root=False,
            )
        )
        edges.append((node_id, parent_id))
        return node_id

    if parsed.components:
        parents = _component_parents(parsed.components)
        ids: list[int] = []
        for seg, parent_idx in zip(parsed.components, parents):
            parent_id = anchor.node_id if parent_idx == -1 else ids[parent_idx]
            level = nodes[parent_id].level + 1
            ids.append(add_node(seg.text, level, parent_id))
    else:
        # No colon itemization: the body still narrows the parent step by
        # step, so chain-split it at strong conjunctions (a single node when
        # none fires).
        body = strip_reference_clause(parsed.raw_text)
        if not body:
            body = parsed.raw_text
        parent_id = anchor.node_id
        for part in split_dependent_body(body):
            parent_id = add_node(part, nodes[parent_id].level + 1, parent_id)

    return FlanGraph(claim_number=claim, nodes=tuple(nodes), edges=tuple(edges))


def _build_independent(parsed: ParsedClaim) -> FlanGraph:
    claim = parsed.claim_number
    preamble = parsed.preamble
    root = FlanNode(
        node_id=0,
        text=preamble.text,
        identity=preamble.identity or _identity_or_none(preamble.text, 0),
        level=0,
        origin_claim=claim,
        is_target=True,
        is_root=True,
    )
    nodes = [root]
    edges: list[tuple[int, int]] = []
    parents = _component_parents(parsed.components)
    ids: list[int] = []
    for seg, parent_idx in zip(parsed.components, parents):
        parent_id = 0 if parent_idx == -1 else ids[parent_idx]
        node_id = len(nodes)
        nodes.append(
            FlanNode(
                node_id=node_id,
                text=seg.text,
                identity=seg.identity or _identity_or_none(seg.text, seg.level),
                level=nodes[parent_id].level + 1,
                origin_claim=claim,
                is_target=True,
                is_root=False,
            )
        )
        edges.append((node_id, parent_id))
        ids.append(node_id)
    return FlanGraph(claim_number=claim, nodes=tuple(nodes), edges=tuple(edges))


def build_coarse_graph(
    parsed_claims: Sequence[ParsedClaim], claim_number: int
) -> FlanGraph:
    """One node per claim on the reference chain; inter-claim edges only."""
    by_number = {p.claim_number: p for p in parsed_claims}
    if claim_number not in by_number:
        raise MissingAncestor(f"claim {claim_number} not among parsed claims")
    chain: list[ParsedClaim] = []
    cursor: int | None = claim_number
    while cursor is not None:
        parsed = by_number.get(cursor)
        if parsed is None:
            raise MissingAncestor(f"claim {claim_number}: missing ancestor {cursor}")
        chain.append(parsed)
        cursor = parsed.reference
    chain.reverse()  # independent ancestor first

    nodes = []
    edges: list[tuple[int, int]] = []
    for i, parsed in enumerate(chain):
        nodes.append(
            FlanNode(
                node_id=i,
                text=parsed.raw_text,
                identity=None,
                level=i,
                origin_claim=parsed.claim_number,
                is_target=parsed.claim_number == claim_number,
                is_root=i == 0,
            )
        )
        if i > 0:
            edges.append((i, i - 1))
    return FlanGraph(claim_number=claim_number, nodes=tuple(nodes), edges=tuple(edges))


def build_solitary(parsed: ParsedClaim) -> FlanGraph:
    """Single node holding the whole claim text; no edges at all."""
    node = FlanNode(
        node_id=0,
        text=parsed.raw_text,
        identity=None,
        level=0,
        origin_claim=parsed.claim_number,
        is_target=True,
        is_root=True,
    )
    return FlanGraph(claim_number=parsed.claim_number, nodes=(node,), edges=())


GRAPH_MODES = ("flan", "coarse", "solitary")


def build_application_graphs(
    parsed_claims: Sequence[ParsedClaim],
    mode: str = "flan",
    warnings: ParseWarnings | None = None,
) -> dict[int, FlanGraph]:
    """Build graphs for every claim of one application, in claim order."""
    if mode not in GRAPH_MODES:
        raise ValueError(f"unknown graph mode {mode!r}")
    ordered = sorted(parsed_claims, key=lambda p: p.claim_number)
    graphs: dict[int, FlanGraph] = {}
    for parsed in ordered:
        if mode == "flan":
            graphs[parsed.claim_number] = build_flan_graph(parsed, graphs, warnings)
        elif mode == "coarse":
            graphs[parsed.claim_number] = build_coarse_graph(ordered, parsed.claim_number)
        else:
            graphs[parsed.claim_number] = build_solitary(parsed)
    return graphs


def _dot_label(node: FlanNode) -> str:
    label = node.identity.surface if node.identity else node.text[:40]
    return label.replace("\\", "\\\\").replace('"', '\\"')


def export_graph(graph: FlanGraph, format: str = "json") -> str:
    """Serialize a graph; byte-stable for identical input.

    DOT marks target nodes with a filled red-ish background (the nodes the
    claim itself contributes) and boxes the root.  JSON is lossless.
    """
    fmt = format.lower()
    if fmt == "json":
        return json.dumps(graph.to_dict(), sort_keys=True, separators=(",", ":"))
    if fmt != "dot":
        raise ValueError(f"unknown export format {format!r}")
    lines = [f"digraph claim_{graph.claim_number} {{"]
    for node in graph.nodes:
        attrs = [f'label="{_dot_label(node)}"']
        if node.is_root:
            attrs.append("shape=box")
        if node.is_target:
            attrs.append("style=filled")
            attrs.append('fillcolor="#f4cccc"')
        lines.append(f"  n{node.node_id} [{', '.join(attrs)}];")
    for frm, to in graph.edges:
        lines.append(f"  n{frm} -> n{to};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_from_json(payload: str) -> FlanGraph:
    return FlanGraph.from_dict(json.loads(payload))
