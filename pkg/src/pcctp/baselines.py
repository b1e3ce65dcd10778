"""Online baseline policies run against a fully specified world.

All three baselines plan under optimism (ambiguous edges assumed traversable),
query the world whenever the next edge of their route is ambiguous, and pay
the same disambiguation charges as the AO* policy: the edge cost when the
edge is traversable, ``blocked_cost_factor`` times the edge cost when it is
not (the robot then stays where it was).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .graph import (AMBIGUOUS, TRAVERSABLE, UNTRAVERSABLE, GraphError, StochasticGraph,
                    dijkstra, optimistic_subgraph, reachable_set, refine, shortest_path)
from .tsp import tour


class WorldOracle:
    """Reveals edge states of one fixed world and logs every query."""

    def __init__(self, graph: StochasticGraph, assignment: str):
        if len(assignment) != graph.k or set(assignment) - {TRAVERSABLE, UNTRAVERSABLE}:
            raise GraphError(f"world {assignment!r} does not match k={graph.k}")
        self.graph = graph
        self.assignment = assignment
        self.log: list[tuple[int, str]] = []

    def query(self, i: int) -> str:
        if not 0 <= i < self.graph.k:
            raise GraphError(f"edge index {i} is not stochastic")
        state = self.assignment[i]
        self.log.append((i, state))
        return state


@dataclass
class Run:
    """Mutable execution state of one online run."""
    graph: StochasticGraph
    oracle: WorldOracle
    blocked_cost_factor: float = 1.0
    at: int = -1
    visited: set = field(default_factory=set)
    info: str = ""
    costs: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)

    def __post_init__(self):
        g = self.graph
        self.at = g.start
        self.info = AMBIGUOUS * g.k
        self.visited = {g.start} & g.targets
        self.trajectory = [g.start]

    @property
    def cost(self) -> float:
        return math.fsum(self.costs)

    def remaining(self) -> frozenset:
        return reachable_set(self.graph, self.at, self.info) - self.visited

    def optimistic(self):
        return optimistic_subgraph(self.graph, self.info)

    def distance(self, u, v) -> float:
        return dijkstra(self.graph, self.optimistic(), u)[0].get(v, math.inf)

    def _edge_between(self, u, v) -> int:
        for w, pos in self.graph.adjacency[u]:
            if w == v:
                return pos
        raise GraphError(f"no edge between {u} and {v}")

    def follow(self, path, stop_after_attempt=False) -> bool:
        """Walk ``path`` (starting at the current node). Returns ``False`` as soon
        as an edge is found blocked, or after any attempt if ``stop_after_attempt``."""
        g = self.graph
        if path[0] != self.at:
            raise GraphError(f"path starts at {path[0]}, robot is at {self.at}")
        for nxt in path[1:]:
            pos = self._edge_between(self.at, nxt)
            e = g.edges[pos]
            i = g.stochastic_of.get(pos)
            attempted = i is not None and self.info[i] == AMBIGUOUS
            if attempted:
                state = self.oracle.query(i)
                self.info = refine(self.info, i, state)
                if state == UNTRAVERSABLE:
                    self.costs.append(e.cost * self.blocked_cost_factor)
                    return False
            elif i is not None and self.info[i] == UNTRAVERSABLE:
                raise GraphError(f"route crosses known blocked edge {e.pair}")
            self.costs.append(e.cost)
            self.at = nxt
            self.trajectory.append(nxt)
            if nxt in g.targets:
                self.visited.add(nxt)
            if attempted and stop_after_attempt:
                return False
        return True

    def go_home(self) -> None:
        start = self.graph.start
        while self.at != start:
            self.follow(shortest_path(self.graph, self.optimistic(), self.at, start).path)

    def result(self) -> tuple[float, list[int]]:
        return self.cost, list(self.trajectory)


def run_greedy(graph: StochasticGraph, oracle: WorldOracle,
               blocked_cost_factor: float = 1.0) -> tuple[float, list[int]]:
    """Head for the nearest reachable unvisited target; replan after each target or blocked edge."""
    run = Run(graph, oracle, blocked_cost_factor)
    while True:
        remaining = run.remaining()
        if not remaining:
            break
        goal = min(sorted(remaining), key=lambda t: run.distance(run.at, t))
        run.follow(shortest_path(graph, run.optimistic(), run.at, goal).path)
    run.go_home()
    return run.result()


def run_optimistic_tsp(graph: StochasticGraph, oracle: WorldOracle,
                       blocked_cost_factor: float = 1.0) -> tuple[float, list[int]]:
    """Follow an optimal optimistic tour of the remaining targets, replanning after every attempt."""
    run = Run(graph, oracle, blocked_cost_factor)
    while True:
        remaining = run.remaining()
        if not remaining and run.at == graph.start:
            break
        _, order = tour(run.distance, run.at, remaining, graph.start)
        route = [run.at]
        opt = run.optimistic()
        for waypoint in order:
            route.extend(shortest_path(graph, opt, route[-1], waypoint).path[1:])
        run.follow(route, stop_after_attempt=True)
    return run.result()


def cyclic_sequence(graph: StochasticGraph) -> list[int]:
    """Target visiting order of an optimal tour under the all-traversable assumption.

    Targets unreachable even optimistically are left out.
    """
    info = AMBIGUOUS * graph.k
    opt = optimistic_subgraph(graph, info)
    reach = reachable_set(graph, graph.start, info) - {graph.start}

    def dist(u, v):
        return dijkstra(graph, opt, u)[0].get(v, math.inf)

    _, order = tour(dist, graph.start, reach, graph.start)
    return order[:-1]


def run_cyclic_routing(graph: StochasticGraph, oracle: WorldOracle,
                       blocked_cost_factor: float = 1.0) -> tuple[float, list[int]]:
    """Cycle through a fixed target sequence, skipping a target for the current
    cycle when its route is found blocked and for good once it is unreachable."""
    run = Run(graph, oracle, blocked_cost_factor)
    sequence = cyclic_sequence(graph)
    while run.remaining():
        for t in sequence:
            if t in run.visited or t not in run.remaining():
                continue
            run.follow(shortest_path(graph, run.optimistic(), run.at, t).path)
    run.go_home()
    return run.result()


BASELINES = {
    "greedy": run_greedy,
    "optimistic-tsp": run_optimistic_tsp,
    "cyclic-routing": run_cyclic_routing,
}
