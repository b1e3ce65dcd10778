"""One check per acceptance criterion; each prints a PASS/FAIL line with the measured margin."""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from instances import g1, g2, random_instance
from oracle import Oracle
from test_extract import oracle_channels, r1_probs
from pcctp.evaluator import ALGORITHMS, enumerate_worlds, execute_policy, expected_regret
from pcctp.extract import (PINCH, CandidateEdge, WaterMaskRaster, classify_pixels, extract_graph,
                           prune_and_assemble)
from pcctp.extract.edges import detect_pinch_points
from pcctp.extract.raster import DETERMINISTIC, LAND, STOCHASTIC
from pcctp.graph import Edge, Node, StochasticGraph, dump_graph
from pcctp.solver import AND, OR, PCCTPSolver, SizeCapError, solve

SUITE_SEEDS = range(200)
TOL = 1e-9


def report(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


class Case:
    def __init__(self, seed):
        self.seed = seed
        self.graph = random_instance(seed)
        self.solver = PCCTPSolver(self.graph)
        self.result = self.solver.solve()
        self.oracle = Oracle(self.graph)


@pytest.fixture(scope="module")
def suite():
    t0 = time.perf_counter()
    cases = [Case(s) for s in SUITE_SEEDS]
    return cases, time.perf_counter() - t0


def test_exactness_vs_oracle(suite):
    cases, elapsed = suite
    worst_oracle = worst_exec = 0.0
    for c in cases:
        g, policy = c.graph, c.result.policy
        assert policy is not None, f"seed {c.seed} has no policy"
        worst_oracle = max(worst_oracle, abs(policy.expected_cost - c.oracle.root_value()))
        walked = math.fsum(w.probability * execute_policy(policy, g, w.assignment)[0]
                           for w in enumerate_worlds(g))
        worst_exec = max(worst_exec, abs(walked - policy.expected_cost))
    ok = worst_oracle <= TOL and worst_exec <= TOL and elapsed < 60
    report(1, ok, f"{len(cases)} instances, max |solver - oracle| = {worst_oracle:.3g}, "
                  f"max |executed - expected| = {worst_exec:.3g}, solve+oracle setup {elapsed:.1f} s")


def test_heuristic_admissible(suite):
    cases, _ = suite
    checked = violations = k0 = k0_inexact = 0
    for c in cases:
        o = c.oracle
        for n in c.result.tree.nodes():
            if not n.expanded:
                continue
            s = n.state
            if n.kind == OR:
                truth = o.value(s.at, s.visited, s.info)
            elif n.kind == AND:
                truth = o.attempt(s.at, o.mask(s.visited), s.info, n.edge)
            else:
                continue
            checked += 1
            h = n.h
            violations += h > truth + TOL
            if c.graph.k == 0:
                k0 += 1
                k0_inexact += not math.isclose(h, truth, rel_tol=0.0, abs_tol=TOL)
    ok = violations == 0 and k0_inexact == 0 and k0 > 0
    report(2, ok, f"{checked} expanded nodes, {violations} over the oracle; "
                  f"{k0} nodes on k=0 instances, {k0_inexact} not exact")


def test_baseline_dominance(suite):
    cases, _ = suite
    worst_gap = -math.inf
    worst_world = math.inf
    for c in cases:
        regrets = {}
        for algo in ALGORITHMS:
            policy = c.result.policy if algo == "pcctp" else None
            rep = expected_regret(c.graph, algo, policy=policy)
            regrets[algo] = rep.expected_regret
            worst_world = min(worst_world, min(r.regret for r in rep.rows))
        for algo in ALGORITHMS[1:]:
            worst_gap = max(worst_gap, regrets["pcctp"] - regrets[algo])
    ok = worst_gap <= TOL and worst_world >= -TOL
    report(3, ok, f"max (pcctp - baseline) expected regret = {worst_gap:.3g}, "
                  f"min per-world regret = {worst_world:.3g}")


def test_toy_goldens():
    res1 = solve(g1())
    regret1 = expected_regret(g1(), "pcctp", policy=res1.policy).expected_regret
    res2 = solve(g2())
    oracle2 = Oracle(g2()).root_value()
    policy_nodes = len(res2.policy.nodes())
    ok = (abs(res1.policy.expected_cost - 14.8) <= 1e-12 and abs(regret1 - 2.0) <= 1e-12
          and abs(res2.policy.expected_cost - oracle2) <= TOL and policy_nodes < res2.tree.size)
    report(4, ok, f"G1 cost {res1.policy.expected_cost!r} regret {regret1!r}; "
                  f"G2 cost {res2.policy.expected_cost!r} vs oracle {oracle2!r}, "
                  f"policy {policy_nodes} nodes < tree {res2.tree.size}")


def runtime_family():
    for seed in range(2000, 2100):
        yield random_instance(seed, n_range=(4, 8), max_targets=6, max_k=8)
    for seed in range(1000, 1060):
        yield random_instance(seed, n_range=(6, 10), max_targets=6, max_k=8)


def test_runtime_envelope():
    slowest, count = 0.0, 0
    for g in runtime_family():
        assert g.k <= 8 and len(g.targets) <= 6
        t0 = time.perf_counter()
        solve(g)
        slowest = max(slowest, time.perf_counter() - t0)
        count += 1
    big = StochasticGraph([Node(i) for i in range(14)],
                          [Edge(i, i + 1, 1.0, 0.5) for i in range(13)], 0, [13])
    t0 = time.perf_counter()
    with pytest.raises(SizeCapError):
        solve(big)
    reject = time.perf_counter() - t0
    ok = slowest < 5.0 and reject < 0.05
    report(5, ok, f"{count} instances (k<=8, |J|<=6), slowest {slowest:.2f} s; "
                  f"k=13 rejected in {reject * 1e3:.2f} ms")


def test_extraction_goldens():
    r1 = WaterMaskRaster(r1_probs(), 10.0)
    [(_, min_prob)] = oracle_channels(r1.probs)
    pinch = detect_pinch_points(classify_pixels(r1), r1)
    pinch_ok = len(pinch) == 1 and abs(pinch[0].block_prob - (1 - min_prob)) <= 1e-12 \
        and abs(pinch[0].block_prob - 0.4) <= 1e-12

    labels = classify_pixels(WaterMaskRaster(np.array([[0.9, 0.5, 0.49]]), 1.0)).labels
    thresholds_ok = list(labels[0]) == [DETERMINISTIC, STOCHASTIC, LAND]

    raster = WaterMaskRaster(np.ones((5, 5)), 1.0)
    cells = [(0, 0), (4, 4), (0, 4), (4, 0)]

    def cand(i, j, length, prob=0.0, kind="deterministic"):
        return CandidateEdge(cells[i], cells[j], (cells[i], cells[j]), length, prob, kind)

    det = {(0, 1): cand(0, 1, 6.0), (0, 2): cand(0, 2, 4.0), (1, 2): cand(1, 2, 4.0)}
    useful, useless = cand(2, 3, 9.0, 0.3, PINCH), cand(0, 1, 7.0, 0.3, PINCH)
    _, pruned, _ = prune_and_assemble(cells, 2, det, [(2, 3, useful), (0, 1, useless)], raster)
    prune_ok = pruned == [useless]

    runs = [dump_graph(extract_graph(r1, (100.0, 100.0), [(450.0, 300.0), (150.0, 300.0)]).graph,
                       provenance=True) for _ in range(2)]
    bytes_ok = runs[0] == runs[1]
    ok = pinch_ok and thresholds_ok and prune_ok and bytes_ok
    report(6, ok, f"R1 pinch points {len(pinch)} with block_prob "
                  f"{[round(e.block_prob, 12) for e in pinch]}; thresholds {thresholds_ok}; "
                  f"planted edge pruned {prune_ok}; byte-identical {bytes_ok}")


def test_conservation(suite):
    worst_sum = 0.0
    for k in range(13):
        probs = np.random.default_rng(k).uniform(0.1, 0.9, k)
        g = StochasticGraph([Node(i) for i in range(k + 1)],
                            [Edge(i, i + 1, 1.0, float(p)) for i, p in enumerate(probs)], 0, [k] if k else [])
        total = math.fsum(w.probability for w in enumerate_worlds(g))
        worst_sum = max(worst_sum, abs(total - 1.0))

    cases, _ = suite
    checked = bad = 0
    for c in cases:
        for n in c.result.tree.nodes():
            if not n.expanded:
                continue
            if n.kind == OR:
                want = min(a.node.f + a.cost for a in n.children) if n.children else math.inf
            elif n.kind == AND:
                want = math.fsum(a.prob * (a.node.f + a.cost) for a in n.children if a.prob > 0)
            else:
                continue
            checked += 1
            bad += not (n.f == want or abs(n.f - want) <= 1e-12)
    ok = worst_sum <= 1e-12 and bad == 0
    report(7, ok, f"max |sum P(w) - 1| for k<=12 = {worst_sum:.3g}; "
                  f"{checked} expanded nodes, {bad} locally inconsistent")
