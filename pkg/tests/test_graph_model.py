import pytest
from hypothesis import given, strategies as st

from polyagraph.graph_model import (
    DisconnectedError,
    DuplicateEdgeError,
    Graph,
    GraphError,
    GraphSizeError,
    Hypergraph,
    LabelRangeError,
    SelfLoopError,
    analyze,
    bipartition,
    from_spec,
    generate,
    one_edge_hypergraph,
    parse_graph,
    parse_hypergraph,
)


def edge_set(g):
    return {frozenset((i + 1, j + 1)) for i, j in g.edges}


def test_parse_triangle():
    g = parse_graph("3\n1 2\n2 3\n1 3")
    assert g.m == 3 and g.N == 3
    assert edge_set(g) == edge_set(generate("complete", 3))


def test_parse_comments_and_blank_lines():
    g = parse_graph("# triangle\n3\n\n1 2  # first\n2 3\n1 3\n")
    assert g.N == 3


@pytest.mark.parametrize("text, exc, kind", [
    ("2\n1 1", SelfLoopError, "self-loop"),
    ("4\n1 2\n3 4", DisconnectedError, "disconnected"),
    ("3\n1 2\n2 1\n2 3", DuplicateEdgeError, "duplicate edge"),
    ("3\n1 2\n2 4", LabelRangeError, "out-of-range label"),
])
def test_parse_errors_are_distinct(text, exc, kind):
    with pytest.raises(exc) as info:
        parse_graph(text)
    assert info.value.kind == kind


def test_parse_malformed():
    with pytest.raises(GraphError):
        parse_graph("1 2\n2 3")
    with pytest.raises(GraphError):
        parse_graph("3\n1 x")


def test_edge_order_preserved_and_round_trip():
    g = parse_graph("3\n3 1\n1 2\n2 3")
    assert g.edges == ((2, 0), (0, 1), (1, 2))
    assert parse_graph(g.to_text()) == g


def test_generators():
    assert edge_set(generate("star", 3)) == {frozenset((1, 3)), frozenset((2, 3))}
    assert generate("star", 3).N == 2
    assert edge_set(generate("cycle", 4)) == {frozenset(p) for p in [(1, 2), (2, 3), (3, 4), (4, 1)]}
    assert generate("complete", 3).N == 3
    assert generate("path", 4).N == 3
    kb = generate("complete_bipartite", 2, 3)
    assert kb.m == 5 and kb.N == 6


@pytest.mark.parametrize("family, sizes", [("cycle", (2,)), ("complete", (1,)), ("star", (1,)),
                                           ("complete_bipartite", (0, 2))])
def test_generator_size_errors(family, sizes):
    with pytest.raises(GraphSizeError):
        generate(family, *sizes)


def test_unknown_family():
    with pytest.raises(GraphError):
        generate("wheel", 5)


def test_analyze_examples():
    k3 = analyze(generate("complete", 3))
    assert not k3.is_bipartite and k3.is_regular and k3.degree == 2

    c4 = analyze(generate("cycle", 4))
    assert c4.is_bipartite and c4.bipartition.balanced and c4.degree == 2
    assert c4.bipartition.part_a == {0, 2} and c4.bipartition.part_b == {1, 3}

    s4 = analyze(generate("star", 4))
    assert s4.is_bipartite and not s4.bipartition.balanced and not s4.is_regular
    assert s4.bipartition.part_a == {0, 1, 2} and s4.bipartition.part_b == {3}
    assert s4.is_star and s4.star_center == 3


def test_bipartition_edges_cross():
    g = generate("cycle", 6)
    bp = bipartition(g)
    for i, j in g.edges:
        assert (i in bp.part_a) != (j in bp.part_a)
    assert bp.part_a | bp.part_b == set(range(6)) and not bp.part_a & bp.part_b


def test_analyze_is_deterministic():
    g = generate("complete_bipartite", 3, 4)
    assert analyze(g) == analyze(g)
    assert 0 in analyze(g).bipartition.part_a


@given(st.sampled_from(["complete", "cycle"]), st.integers(3, 12))
def test_regular_handshake(family, m):
    g = generate(family, m)
    rep = analyze(g)
    assert rep.is_regular and 2 * g.N == rep.degree * g.m


@given(st.integers(1, 6), st.integers(1, 6))
def test_complete_bipartite_balance(a, b):
    rep = analyze(generate("complete_bipartite", a, b))
    assert rep.is_bipartite
    assert rep.bipartition.balanced == (a == b)


def test_odd_cycles_not_bipartite():
    for m in (3, 5, 7):
        assert not analyze(generate("cycle", m)).is_bipartite


def test_hypergraph_parse_and_validation():
    h = parse_hypergraph("4\n1 2 3\n3 4")
    assert h.m == 4 and h.N == 2
    assert list(h.degrees) == [1, 1, 2, 1]
    with pytest.raises(GraphSizeError):
        Hypergraph(3, ((0,), (0, 1, 2)))
    with pytest.raises(DisconnectedError):
        Hypergraph(4, ((0, 1), (2, 3)))
    with pytest.raises(DisconnectedError):
        Hypergraph(4, ((0, 1, 2),))
    with pytest.raises(DuplicateEdgeError):
        Hypergraph(3, ((0, 0, 1), (1, 2)))


def test_hypergraph_padded():
    h = Hypergraph(4, ((0, 1, 2), (2, 3)))
    members, sizes = h.padded()
    assert members.tolist() == [[0, 1, 2], [2, 3, -1]]
    assert sizes.tolist() == [3, 2]


def test_from_spec():
    assert from_spec("complete:5").N == 10
    assert from_spec("complete_bipartite:3:3").N == 9
    assert from_spec("hyper:one-edge:4") == one_edge_hypergraph(4)
    with pytest.raises(GraphError):
        from_spec("cycle:x")
    with pytest.raises(GraphError):
        from_spec("hyper:two-edge:4")


def test_graph_is_immutable():
    g = generate("cycle", 4)
    with pytest.raises(AttributeError):
        g.m = 5
    assert isinstance(g, Graph)
