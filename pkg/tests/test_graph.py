import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flangraph import (
    build_application_graphs,
    build_coarse_graph,
    build_flan_graph,
    build_solitary,
    export_graph,
    graph_from_json,
    match_preamble,
    parse,
    validate_graph,
)
from flangraph.errors import MissingAncestor
from flangraph.graph import FlanGraph, FlanNode
from flangraph.model import Identity
from flangraph.parsing import ParseWarnings
from flangraph.synth import gen_structural_corpus


@pytest.fixture(scope="module")
def touchpoint_graphs(touchpoint_parsed):
    return build_application_graphs(touchpoint_parsed, "flan")


def _ident(node):
    return node.identity.normalized if node.identity else None


def _check_against_golden(graph, spec):
    assert len(graph.nodes) == spec["nodes"]
    assert len(graph.edges) == spec["edges"]
    assert len(graph.targets) == spec["targets"]
    parent_of = dict(graph.edges)
    new_nodes = sorted(graph.targets, key=lambda n: n.node_id)
    if "anchor" in spec:
        anchor = graph.nodes[parent_of[new_nodes[0].node_id]]
        assert _ident(anchor) == spec["anchor"]["identity"]
        assert anchor.origin_claim == spec["anchor"]["origin_claim"]
        for got, want in zip(new_nodes, spec["new_nodes"]):
            assert _ident(got) == want["identity"]
            if "text_prefix" in want:
                assert got.text.startswith(want["text_prefix"]), got.text
            parent = graph.nodes[parent_of[got.node_id]]
            if want["parent"] == "anchor":
                assert parent.node_id == anchor.node_id
            else:
                assert parent.node_id == new_nodes[want["parent"]].node_id


def test_touchpoint_golden_graphs(touchpoint_graphs, golden):
    for number, spec in golden["claims"].items():
        _check_against_golden(touchpoint_graphs[int(number)], spec)


def test_claim_1_edge_identities(touchpoint_graphs, golden):
    graph = touchpoint_graphs[1]
    got = sorted(
        (_ident(graph.nodes[frm]), _ident(graph.nodes[to])) for frm, to in graph.edges
    )
    want = sorted((a, b) for a, b in golden["claims"]["1"]["edge_identities"])
    assert got == want


def test_claim_2_has_two_styled_targets(touchpoint_graphs):
    dot = export_graph(touchpoint_graphs[2], "dot")
    assert dot.count("fillcolor") == 2


def test_inheritance_monotonicity(touchpoint_graphs, golden):
    for child, parent in golden["reference_map"].items():
        child_nodes = {(n.text, n.origin_claim) for n in touchpoint_graphs[int(child)].nodes}
        parent_nodes = {(n.text, n.origin_claim) for n in touchpoint_graphs[parent].nodes}
        assert parent_nodes <= child_nodes


def test_all_touchpoint_graphs_valid(touchpoint_graphs):
    for graph in touchpoint_graphs.values():
        validate_graph(graph)


def test_building_child_does_not_mutate_parent(touchpoint_parsed):
    by_number = {p.claim_number: p for p in touchpoint_parsed}
    g1 = build_flan_graph(by_number[1], {})
    before = export_graph(g1, "json")
    build_flan_graph(by_number[2], {1: g1})
    assert export_graph(g1, "json") == before


def test_missing_ancestor(touchpoint_parsed):
    by_number = {p.claim_number: p for p in touchpoint_parsed}
    with pytest.raises(MissingAncestor):
        build_flan_graph(by_number[2], {})


def test_match_failure_falls_back_to_root(touchpoint_parsed):
    by_number = {p.claim_number: p for p in touchpoint_parsed}
    g1 = build_flan_graph(by_number[1], {})
    from flangraph import Claim

    # "apparatus" avoids the root's "system" identity, so nothing can match.
    odd = parse(Claim(3, "The apparatus of claim 1, where the flux capacitor is purple."))
    warnings = ParseWarnings()
    graph = build_flan_graph(odd, {1: g1}, warnings)
    parent_of = dict(graph.edges)
    new = [n for n in graph.nodes if n.is_target]
    assert graph.nodes[parent_of[new[0].node_id]].is_root
    assert any("matched nothing" in e for e in warnings.events)


def test_match_preamble_single_exact_match(touchpoint_parsed):
    g1 = build_flan_graph(touchpoint_parsed[0], {})
    from flangraph.model import ClaimSegment, SegmentKind

    preamble = ClaimSegment("The system of claim 1, further improved.", 0, SegmentKind.PREAMBLE)
    result = match_preamble(preamble, g1.nodes)
    assert g1.nodes[result.node_id].is_root
    assert not result.fallback


def test_match_preamble_prefers_deeper_node(touchpoint_parsed, touchpoint_graphs):
    # "control component" (level 1) must beat "system" (level 0).
    result = match_preamble(touchpoint_parsed[1].preamble, touchpoint_graphs[1].nodes)
    node = touchpoint_graphs[1].nodes[result.node_id]
    assert _ident(node) == "control component"
    assert node.level == 1


# --- coarse and solitary -----------------------------------------------------


def test_coarse_chains(touchpoint_parsed, golden):
    for number, spec in golden["coarse"].items():
        graph = build_coarse_graph(touchpoint_parsed, int(number))
        validate_graph(graph)
        assert len(graph.nodes) == spec["nodes"]
        assert len(graph.edges) == spec["edges"]
        assert [n.origin_claim for n in graph.nodes] == spec["chain"]
        assert sum(n.is_target for n in graph.nodes) == 1
        assert graph.nodes[0].is_root


def test_coarse_missing_ancestor(touchpoint_parsed):
    partial = [p for p in touchpoint_parsed if p.claim_number != 2]
    with pytest.raises(MissingAncestor):
        build_coarse_graph(partial, 3)


def test_solitary(touchpoint_parsed):
    for parsed in touchpoint_parsed:
        graph = build_solitary(parsed)
        validate_graph(graph)
        assert len(graph.nodes) == 1
        assert graph.edges == ()
        assert graph.nodes[0].text == parsed.raw_text
        assert graph.nodes[0].is_root and graph.nodes[0].is_target


# --- export ------------------------------------------------------------------


def test_json_export_round_trip(touchpoint_graphs):
    for graph in touchpoint_graphs.values():
        assert graph_from_json(export_graph(graph, "json")) == graph


def test_exports_byte_stable(touchpoint_parsed):
    first = build_application_graphs(touchpoint_parsed, "flan")
    second = build_application_graphs(touchpoint_parsed, "flan")
    for number in first:
        assert export_graph(first[number], "json") == export_graph(second[number], "json")
        assert export_graph(first[number], "dot") == export_graph(second[number], "dot")


def test_solitary_dot_single_node(touchpoint_parsed):
    dot = export_graph(build_solitary(touchpoint_parsed[0]), "dot")
    assert "->" not in dot
    assert dot.count("fillcolor") == 1  # the lone node is its own target


def test_validate_rejects_cycle():
    ident = Identity("x", "x", 0)
    nodes = (
        FlanNode(0, "root", ident, 0, 1, True, True),
        FlanNode(1, "a", ident, 1, 1, True, False),
        FlanNode(2, "b", ident, 1, 1, True, False),
    )
    bad = FlanGraph(1, nodes, ((1, 2), (2, 1)))
    with pytest.raises(Exception):
        validate_graph(bad)


# --- structural property sweep ----------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["flan", "coarse", "solitary"]))
def test_generated_corpus_builds_valid_graphs(seed, mode):
    app = gen_structural_corpus(1, seed=seed)[0]
    parsed = [parse(c) for c in app.claims]
    graphs = build_application_graphs(parsed, mode)
    assert set(graphs) == {c.number for c in app.claims}
    by_number = {p.claim_number: p for p in parsed}
    for number, graph in graphs.items():
        validate_graph(graph)
        assert all(n.is_target == (n.origin_claim == number) for n in graph.nodes)
        if mode == "flan" and by_number[number].reference is not None:
            parent_graph = graphs[by_number[number].reference]
            child_nodes = {(n.text, n.origin_claim) for n in graph.nodes}
            assert {(n.text, n.origin_claim) for n in parent_graph.nodes} <= child_nodes
