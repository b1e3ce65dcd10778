"""Stochastic graph model, information vectors and path primitives.

An information vector is a ``str`` of length ``k`` over ``"ATU"`` (ambiguous,
traversable, untraversable), one character per stochastic edge in stochastic
index order. A world assignment is a ``str`` over ``"TU"``.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

AMBIGUOUS = "A"
TRAVERSABLE = "T"
UNTRAVERSABLE = "U"


class GraphError(ValueError):
    """Malformed graph or an invalid query against one."""


@dataclass(frozen=True)
class Node:
    id: int
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    cost: float
    block_prob: float = 0.0
    # provenance from raster extraction; not part of identity
    kind: str | None = field(default=None, compare=False)
    pixel_path: tuple | None = field(default=None, compare=False, repr=False)

    @property
    def stochastic(self) -> bool:
        return self.block_prob > 0.0

    @property
    def pair(self) -> tuple[int, int]:
        return (self.u, self.v)

    def other(self, node: int) -> int:
        if node == self.u:
            return self.v
        if node == self.v:
            return self.u
        raise GraphError(f"node {node} is not an endpoint of edge {self.pair}")


class PathResult(NamedTuple):
    cost: float
    path: list[int]


@dataclass(frozen=True)
class RobotState:
    at: int
    visited: frozenset
    info: str


@dataclass(frozen=True)
class World:
    assignment: str
    probability: float


class StochasticGraph:
    """Undirected graph with per-edge blocking probabilities.

    Edges are addressed by their position in ``edges``; stochastic edges
    additionally by their stochastic index ``0..k-1``, assigned in order of
    appearance.
    """

    def __init__(self, nodes: Iterable[Node], edges: Iterable[Edge], start: int,
                 targets: Iterable[int]):
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.start = start
        self.targets = frozenset(targets)

        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise GraphError("duplicate node ids")
        self.node_ids = frozenset(ids)
        if start not in self.node_ids:
            raise GraphError(f"start {start} is not a node")
        if not self.targets <= self.node_ids:
            raise GraphError(f"unknown target ids {sorted(self.targets - self.node_ids)}")

        seen = set()
        self.adjacency: dict[int, list[tuple[int, int]]] = {i: [] for i in ids}
        self.stochastic_index: list[int] = []
        self.stochastic_of: dict[int, int] = {}
        for pos, e in enumerate(self.edges):
            if e.u not in self.node_ids or e.v not in self.node_ids:
                raise GraphError(f"edge {e.pair} references an unknown node")
            if e.u == e.v:
                raise GraphError(f"self-loop at node {e.u}")
            if not (e.cost >= 0.0) or math.isinf(e.cost):
                raise GraphError(f"edge {e.pair} has invalid cost {e.cost}")
            if not 0.0 <= e.block_prob <= 1.0:
                raise GraphError(f"edge {e.pair} has invalid block_prob {e.block_prob}")
            key = frozenset(e.pair)
            if key in seen:
                raise GraphError(f"parallel edge between {e.u} and {e.v}")
            seen.add(key)
            self.adjacency[e.u].append((e.v, pos))
            self.adjacency[e.v].append((e.u, pos))
            if e.stochastic:
                self.stochastic_of[pos] = len(self.stochastic_index)
                self.stochastic_index.append(pos)
        self._sp_cache: dict = {}

    @property
    def k(self) -> int:
        return len(self.stochastic_index)

    def stochastic_edge(self, i: int) -> Edge:
        return self.edges[self.stochastic_index[i]]

    def edge_state(self, pos: int, info: str) -> str:
        """State of the edge at position ``pos`` under ``info``; deterministic edges are T."""
        i = self.stochastic_of.get(pos)
        return TRAVERSABLE if i is None else info[i]

    def check_node(self, node: int) -> None:
        if node not in self.node_ids:
            raise GraphError(f"unknown node id {node}")

    def check_info(self, info: str) -> None:
        if len(info) != self.k:
            raise GraphError(f"information vector has length {len(info)}, expected k={self.k}")
        if set(info) - {AMBIGUOUS, TRAVERSABLE, UNTRAVERSABLE}:
            raise GraphError(f"invalid information vector {info!r}")

    def root_state(self) -> RobotState:
        visited = frozenset({self.start}) & self.targets
        return RobotState(self.start, visited, AMBIGUOUS * self.k)

    def scaled(self, factor: float) -> "StochasticGraph":
        edges = [Edge(e.u, e.v, e.cost * factor, e.block_prob, e.kind, e.pixel_path)
                 for e in self.edges]
        return StochasticGraph(self.nodes, edges, self.start, self.targets)

    def to_dict(self, provenance: bool = False) -> dict:
        edges = []
        for e in self.edges:
            rec = {"u": e.u, "v": e.v, "cost": e.cost, "block_prob": e.block_prob}
            if provenance and e.kind is not None:
                rec["kind"] = e.kind
                rec["pixel_path"] = [list(p) for p in (e.pixel_path or ())]
            edges.append(rec)
        return {
            "nodes": [{"id": n.id, "x": n.x, "y": n.y} for n in self.nodes],
            "edges": edges,
            "start": self.start,
            "targets": sorted(self.targets),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StochasticGraph":
        try:
            nodes = [Node(int(n["id"]), float(n.get("x", 0.0)), float(n.get("y", 0.0)))
                     for n in data["nodes"]]
            edges = []
            for e in data["edges"]:
                pixel_path = e.get("pixel_path")
                edges.append(Edge(int(e["u"]), int(e["v"]), float(e["cost"]),
                                  float(e.get("block_prob", 0.0)), e.get("kind"),
                                  tuple(tuple(p) for p in pixel_path) if pixel_path else None))
            return cls(nodes, edges, int(data["start"]), [int(t) for t in data["targets"]])
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph record: {exc!r}") from exc

    def __repr__(self):
        return (f"StochasticGraph(|V|={len(self.nodes)}, |E|={len(self.edges)}, k={self.k}, "
                f"start={self.start}, targets={sorted(self.targets)})")


def load_graph(path) -> StochasticGraph:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return StochasticGraph.from_dict(data)


def dump_graph(g: StochasticGraph, provenance: bool = False) -> str:
    return json.dumps(g.to_dict(provenance), indent=1, sort_keys=True) + "\n"


def _memo(g: StochasticGraph, key, compute):
    try:
        return g._sp_cache[key]
    except KeyError:
        value = g._sp_cache[key] = compute()
        return value


def known_subgraph(g: StochasticGraph, info: str) -> frozenset[int]:
    """Edge positions usable without a disambiguation: deterministic or known traversable."""
    def compute():
        g.check_info(info)
        return frozenset(pos for pos in range(len(g.edges))
                         if g.edge_state(pos, info) == TRAVERSABLE)
    return _memo(g, ("known", info), compute)


def optimistic_subgraph(g: StochasticGraph, info: str) -> frozenset[int]:
    """Edge positions not known to be untraversable."""
    def compute():
        g.check_info(info)
        return frozenset(pos for pos in range(len(g.edges))
                         if g.edge_state(pos, info) != UNTRAVERSABLE)
    return _memo(g, ("optimistic", info), compute)


def world_subgraph(g: StochasticGraph, assignment: str) -> frozenset[int]:
    if len(assignment) != g.k or set(assignment) - {TRAVERSABLE, UNTRAVERSABLE}:
        raise GraphError(f"invalid world assignment {assignment!r} for k={g.k}")
    return known_subgraph(g, assignment)


def dijkstra(g: StochasticGraph, edges: frozenset[int], source: int):
    """Single-source distances and predecessors over the given edge positions.

    Memoized per (edge set, source) on the graph instance.
    """
    key = (edges, source)
    cached = g._sp_cache.get(key)
    if cached is not None:
        return cached
    g.check_node(source)
    dist = {source: 0.0}
    pred: dict[int, int] = {}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, pos in g.adjacency[u]:
            if pos not in edges or v in done:
                continue
            nd = d + g.edges[pos].cost
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    g._sp_cache[key] = (dist, pred)
    return dist, pred


def shortest_path(g: StochasticGraph, edges: frozenset[int], src: int,
                  dst: int) -> PathResult | None:
    """Minimal-cost path over ``edges``, or ``None`` when ``dst`` is unreachable."""
    g.check_node(dst)
    dist, pred = dijkstra(g, edges, src)
    if dst not in dist:
        return None
    path = [dst]
    while path[-1] != src:
        path.append(pred[path[-1]])
    path.reverse()
    return PathResult(dist[dst], path)


def component(g: StochasticGraph, edges: frozenset[int], source: int) -> set[int]:
    g.check_node(source)
    seen = {source}
    stack = [source]
    while stack:
        u = stack.pop()
        for v, pos in g.adjacency[u]:
            if pos in edges and v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def reachable_set(g: StochasticGraph, at: int, info: str) -> frozenset[int]:
    """Targets connected to ``at`` through edges not known to be untraversable."""
    return _memo(g, ("reach", at, info),
                 lambda: frozenset(component(g, optimistic_subgraph(g, info), at) & g.targets))


def definitively_reachable_set(g: StochasticGraph, at: int, info: str) -> frozenset[int]:
    """Targets connected to ``at`` even if every ambiguous edge turns out blocked."""
    return _memo(g, ("definite", at, info),
                 lambda: frozenset(component(g, known_subgraph(g, info), at) & g.targets))


def world_probability(g: StochasticGraph, assignment: str) -> float:
    prob = 1.0
    for i, state in enumerate(assignment):
        p = g.stochastic_edge(i).block_prob
        prob *= p if state == UNTRAVERSABLE else 1.0 - p
    return prob


def refine(info: str, i: int, state: str) -> str:
    """Disambiguate stochastic edge ``i``; known entries are never overwritten."""
    if info[i] != AMBIGUOUS:
        raise GraphError(f"stochastic edge {i} is already {info[i]}")
    return info[:i] + state + info[i + 1:]
