"""Exhaustive world enumeration, policy execution and expected-regret reports."""
from __future__ import annotations

import csv
import io
import itertools
import math
import random
from dataclasses import dataclass, field

from .baselines import BASELINES, WorldOracle
from .graph import (TRAVERSABLE, UNTRAVERSABLE, GraphError, StochasticGraph, World, component,
                    dijkstra, world_probability, world_subgraph)
from .solver import AND, DEFAULT_MAX_STOCHASTIC, Policy, SizeCapError, solve
from .tsp import tour

ALGORITHMS = ("pcctp", "greedy", "optimistic-tsp", "cyclic-routing")


class InfeasibleError(RuntimeError):
    """The instance has no finite-cost policy."""


def enumerate_worlds(g: StochasticGraph, cap: int = DEFAULT_MAX_STOCHASTIC) -> list[World]:
    """All 2^k edge-state assignments in lexicographic T<U order, with product probabilities."""
    if g.k > cap:
        raise SizeCapError(f"k={g.k} exceeds the world enumeration cap {cap}")
    worlds = []
    for states in itertools.product((TRAVERSABLE, UNTRAVERSABLE), repeat=g.k):
        assignment = "".join(states)
        worlds.append(World(assignment, world_probability(g, assignment)))
    return worlds


def sample_worlds(g: StochasticGraph, n: int, seed: int = 0) -> list[World]:
    """``n`` independent worlds drawn from the blocking probabilities (fixed seed)."""
    rng = random.Random(seed)
    worlds = []
    for _ in range(n):
        assignment = "".join(UNTRAVERSABLE if rng.random() < g.stochastic_edge(i).block_prob
                             else TRAVERSABLE for i in range(g.k))
        worlds.append(World(assignment, 1.0 / n))
    return worlds


def execute_policy(policy: Policy, g: StochasticGraph, world: str) -> tuple[float, list[int]]:
    """Walk the policy tree, taking the outcome the world dictates at each attempt."""
    if len(world) != g.k:
        raise GraphError(f"world has {len(world)} entries, policy graph has k={g.k}")
    n = policy.root
    costs = []
    trajectory = [g.start]
    while n.children:
        if n.kind == AND:
            # outcomes are stored traversable first
            n = n.children[0] if world[n.edge] == TRAVERSABLE else n.children[1]
        else:
            n = n.children[0]
        costs.append(n.arc_cost)
        trajectory.extend(n.path[1:])
    return math.fsum(costs), trajectory


def privileged_cost(g: StochasticGraph, world: str) -> float:
    """Optimal tour over the targets reachable in the fully revealed world."""
    edges = world_subgraph(g, world)
    reach = component(g, edges, g.start) & g.targets - {g.start}
    if not reach:
        return 0.0

    def dist(u, v):
        return dijkstra(g, edges, u)[0].get(v, math.inf)

    return tour(dist, g.start, reach)[0]


@dataclass
class WorldRow:
    assignment: str
    probability: float
    cost: float
    privileged: float
    trajectory: list[int] = field(repr=False)

    @property
    def regret(self) -> float:
        return self.cost - self.privileged


@dataclass
class EvaluationReport:
    algorithm: str
    rows: list[WorldRow]
    config: dict = field(default_factory=dict)

    @property
    def expected_cost(self) -> float:
        return math.fsum(r.probability * r.cost for r in self.rows)

    @property
    def expected_privileged(self) -> float:
        return math.fsum(r.probability * r.privileged for r in self.rows)

    @property
    def expected_regret(self) -> float:
        return math.fsum(r.probability * r.regret for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["world", "probability", "cost", "privileged_cost", "regret"])
        for r in self.rows:
            w.writerow([r.assignment or "-", repr(r.probability), repr(r.cost),
                        repr(r.privileged), repr(r.regret)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "worlds": len(self.rows),
            "expected_cost": self.expected_cost,
            "expected_privileged_cost": self.expected_privileged,
            "expected_regret": self.expected_regret,
            "config": self.config,
        }


def policy_runner(g: StochasticGraph, algorithm: str, blocked_cost_factor: float = 1.0,
                  max_stochastic: int = DEFAULT_MAX_STOCHASTIC, policy: Policy | None = None):
    """Return ``world -> (cost, trajectory)`` for the named algorithm."""
    if algorithm == "pcctp":
        if policy is None:
            policy = solve(g, blocked_cost_factor, max_stochastic).policy
        if policy is None:
            raise InfeasibleError("no finite-cost policy exists for this instance")
        return lambda world: execute_policy(policy, g, world)
    try:
        baseline = BASELINES[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}") from None
    return lambda world: baseline(g, WorldOracle(g, world), blocked_cost_factor)


def expected_regret(g: StochasticGraph, algorithm: str, blocked_cost_factor: float = 1.0,
                    world_cap: int = DEFAULT_MAX_STOCHASTIC, policy: Policy | None = None,
                    worlds: list[World] | None = None) -> EvaluationReport:
    """Per-world cost, privileged cost and regret of ``algorithm`` over every world."""
    if worlds is None:
        worlds = enumerate_worlds(g, world_cap)
    run = policy_runner(g, algorithm, blocked_cost_factor, max(world_cap, g.k), policy)
    rows = []
    for w in worlds:
        cost, traj = run(w.assignment)
        rows.append(WorldRow(w.assignment, w.probability, cost, privileged_cost(g, w.assignment),
                             traj))
    config = {"blocked_cost_factor": blocked_cost_factor, "world_cap": world_cap}
    return EvaluationReport(algorithm, rows, config)


def monte_carlo_regret(g: StochasticGraph, algorithm: str, samples: int = 1000, seed: int = 0,
                       blocked_cost_factor: float = 1.0,
                       max_stochastic: int = 64) -> EvaluationReport:
    """Sampled estimate for instances above the enumeration cap."""
    worlds = sample_worlds(g, samples, seed)
    report = expected_regret(g, algorithm, blocked_cost_factor, max(g.k, 1), worlds=worlds)
    report.config.update(samples=samples, seed=seed)
    return report
