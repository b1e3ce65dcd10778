import math

import pytest

from pcctp.graph import Edge, GraphError, Node, RobotState, StochasticGraph
from pcctp.solver import (AND, LEAF, OR, AONode, PCCTPSolver, SizeCapError, backprop,
                          classify_tree, select_node, solve, tree_to_dot)
from instances import g1, g2, random_instance
from oracle import Oracle


def test_g1_value_matches_oracle():
    res = solve(g1())
    assert res.feasible
    assert res.policy.expected_cost == pytest.approx(Oracle(g1()).root_value(), abs=1e-12)


def test_g2_value_and_policy_smaller_than_tree():
    g = g2()
    res = solve(g)
    assert res.policy.expected_cost == pytest.approx(Oracle(g).root_value(), abs=1e-12)
    assert len(res.policy.nodes()) < res.tree.size


def test_g1_root_heuristic_is_relaxed_tour():
    # target 1 is definitely reachable (long edge 0-1), so the bound is the optimistic round trip
    s = PCCTPSolver(g1(), branch_edges=0)
    assert s.heuristic(g1().root_state()) == pytest.approx(2 * (2 + 1 + 1))


def test_g1_root_heuristic_branched():
    # (2,3) open w.p. 0.6: round trip 8; blocked: only the 0-1 edge remains, 20
    s = PCCTPSolver(g1(), branch_edges=1)
    assert s.heuristic(g1().root_state()) == pytest.approx(0.6 * 8 + 0.4 * 20)


def test_heuristic_exact_without_stochastic_edges():
    g = StochasticGraph([Node(i) for i in range(4)],
                        [Edge(0, 1, 3.0), Edge(1, 2, 4.0), Edge(2, 3, 1.0), Edge(0, 3, 9.0)],
                        0, [2, 3])
    s = PCCTPSolver(g)
    assert s.heuristic(g.root_state()) == pytest.approx(Oracle(g).root_value())
    res = s.solve()
    assert res.policy.expected_cost == pytest.approx(16.0)
    assert res.tree.expansions == 1


def test_start_only_instance_is_a_leaf():
    g = StochasticGraph([Node(0), Node(1)], [Edge(0, 1, 1.0, 0.5)], 0, [0])
    res = solve(g)
    assert res.policy.expected_cost == 0.0
    assert res.tree.root.kind == LEAF


def test_size_cap():
    edges = [Edge(0, i, 1.0, 0.5) for i in range(1, 14)]
    g = StochasticGraph([Node(i) for i in range(14)], edges, 0, [1])
    with pytest.raises(SizeCapError):
        PCCTPSolver(g)
    assert PCCTPSolver(g, max_stochastic=13).graph is g


@pytest.mark.parametrize("factor", [0.0, 0.5, 2.0])
def test_blocked_cost_factor_matches_oracle(factor):
    for seed in range(15):
        g = random_instance(seed)
        got = solve(g, blocked_cost_factor=factor).policy.expected_cost
        assert got == pytest.approx(Oracle(g, factor).root_value(), abs=1e-9)


def test_local_consistency_of_final_tree():
    for seed in range(20):
        tree = solve(random_instance(seed)).tree
        for n in tree.nodes():
            if not n.expanded:
                continue
            if n.kind == OR:
                assert n.f == min(a.node.f + a.cost for a in n.children)
            elif n.kind == AND:
                assert n.f == pytest.approx(sum(a.prob * (a.node.f + a.cost)
                                                for a in n.children if a.prob > 0), abs=1e-12)


def test_root_trace_non_decreasing():
    for seed in range(100):
        trace = solve(random_instance(seed)).tree.root_f_trace
        assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))
        assert trace[-1] == solve(random_instance(seed)).policy.expected_cost


def _state(at=0):
    return RobotState(at, frozenset(), "")


def test_select_and_backprop_on_hand_built_tree():
    root = AONode(OR, _state(), expanded=True)
    a = root.add(AONode(OR, _state(1), f=5.0), 1.0)
    b = root.add(AONode(AND, _state(2), f=1.0, expanded=True), 2.0).node
    t = b.add(AONode(LEAF, _state(3), solved=True), 1.0, 0.5).node
    u = b.add(AONode(OR, _state(4), f=2.0), 1.0, 0.5).node
    backprop(root)
    assert root.best.node is b
    assert select_node(root) is u
    u.expanded = True
    u.add(AONode(LEAF, _state(0), solved=True), 10.0)
    backprop(u)
    assert u.f == 10.0 and u.solved
    assert b.f == pytest.approx(0.5 * 1.0 + 0.5 * 11.0) and b.solved
    assert root.f == a.node.f + a.cost and root.best is a and not root.solved
    assert t.solved


def test_dead_end_or_node_is_infinite():
    root = AONode(OR, _state(), expanded=True)
    backprop(root)
    assert math.isinf(root.f) and root.solved


def test_and_outcomes_validates_edge():
    s = PCCTPSolver(g1())
    with pytest.raises(GraphError):
        s.and_outcomes(RobotState(0, frozenset(), "A"), 0)
    with pytest.raises(GraphError):
        s.and_outcomes(RobotState(2, frozenset(), "T"), 0)
    t, u = s.and_outcomes(RobotState(2, frozenset(), "A"), 0)
    assert t[0].at == 3 and t[0].info == "T" and t[2] == pytest.approx(0.6)
    assert u[0].at == 2 and u[0].info == "U" and u[2] == pytest.approx(0.4)


def test_critical_edges_bridge_only():
    g = StochasticGraph([Node(i) for i in range(4)],
                        [Edge(0, 1, 1.0, 0.5), Edge(1, 2, 1.0), Edge(0, 2, 1.0, 0.5),
                         Edge(2, 3, 1.0, 0.5)], 0, [3])
    s = PCCTPSolver(g)
    assert s.critical_edges(g.root_state(), 3) == {0, 1, 2}
    assert s.critical_edges(RobotState(0, frozenset(), "UAA"), 3) == {1, 2}


def test_policy_dict_and_dot():
    res = solve(g1())
    d = res.policy.to_dict()
    assert d["expected_cost"] == res.policy.expected_cost
    ids = {n["id"] for n in d["nodes"]}
    assert d["root"] in ids
    assert all(set(n["children"]) <= ids for n in d["nodes"])
    kinds = {n["kind"] for n in d["nodes"]}
    assert {OR, AND} <= kinds
    dot = tree_to_dot(res.tree, res.policy)
    labels = classify_tree(res.tree, res.policy)
    assert dot.count("fillcolor=green") == sum(v == "policy" for v in labels.values())
    assert dot.startswith("digraph")
