import json

import pytest

from pcctp.graph import (Edge, GraphError, Node, StochasticGraph, definitively_reachable_set,
                         dump_graph, known_subgraph, load_graph, optimistic_subgraph,
                         reachable_set, refine, shortest_path, world_probability)
from instances import g1, g2


def test_stochastic_indexing_follows_edge_order():
    g = g2()
    assert g.k == 2
    assert g.stochastic_edge(0).pair == (2, 3)
    assert g.stochastic_edge(1).pair == (4, 5)


@pytest.mark.parametrize("edges, msg", [
    ([Edge(0, 1, 1.0), Edge(1, 0, 2.0)], "parallel"),
    ([Edge(0, 0, 1.0)], "self-loop"),
    ([Edge(0, 1, -1.0)], "cost"),
    ([Edge(0, 1, 1.0, 1.5)], "block_prob"),
    ([Edge(0, 7, 1.0)], "unknown"),
])
def test_invalid_graphs_rejected(edges, msg):
    with pytest.raises(GraphError, match=msg):
        StochasticGraph([Node(0), Node(1)], edges, 0, [1])


def test_unknown_target_and_start():
    with pytest.raises(GraphError):
        StochasticGraph([Node(0)], [], 3, [])
    with pytest.raises(GraphError):
        StochasticGraph([Node(0)], [], 0, [5])


def test_root_visited_contains_start_target():
    g = StochasticGraph([Node(0), Node(1)], [Edge(0, 1, 1.0)], 0, [0, 1])
    assert g.root_state().visited == {0}
    assert g1().root_state().visited == frozenset()


def test_subgraphs_and_reachability():
    g = g1()
    pos = g.stochastic_index[0]
    assert pos not in known_subgraph(g, "A")
    assert pos in optimistic_subgraph(g, "A")
    assert pos in known_subgraph(g, "T")
    assert pos not in optimistic_subgraph(g, "U")
    assert reachable_set(g, 0, "A") == {1}
    assert definitively_reachable_set(g, 0, "A") == {1}


def test_shortest_path_respects_info():
    g = g1()
    assert shortest_path(g, optimistic_subgraph(g, "A"), 0, 1).cost == 4.0
    res = shortest_path(g, optimistic_subgraph(g, "U"), 0, 1)
    assert res.cost == 10.0 and res.path == [0, 1]


def test_shortest_path_disconnected_is_none():
    g = StochasticGraph([Node(0), Node(1), Node(2)], [Edge(0, 1, 1.0, 0.5)], 0, [1])
    assert shortest_path(g, optimistic_subgraph(g, "U"), 0, 1) is None
    assert reachable_set(g, 0, "U") == frozenset()


def test_world_probability():
    g = g2()
    assert world_probability(g, "TU") == pytest.approx(0.5 * 0.3)
    assert world_probability(g, "UU") == pytest.approx(0.5 * 0.3)
    assert world_probability(g, "TT") == pytest.approx(0.5 * 0.7)


def test_refine_never_overwrites():
    assert refine("AA", 1, "U") == "AU"
    with pytest.raises(GraphError):
        refine("AU", 1, "T")


def test_json_round_trip(tmp_path):
    g = g2()
    p = tmp_path / "g.json"
    p.write_text(dump_graph(g))
    h = load_graph(p)
    assert h.edges == g.edges and h.start == g.start and h.targets == g.targets
    assert dump_graph(h) == dump_graph(g)


def test_json_errors_carry_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n"nodes": [\n')
    with pytest.raises(GraphError, match="line"):
        load_graph(p)
    p.write_text(json.dumps({"nodes": []}))
    with pytest.raises(GraphError):
        load_graph(p)
