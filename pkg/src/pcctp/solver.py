"""Exact PCCTP policies by AO* search over an AND-OR graph.

OR nodes are decision points of the robot, AND nodes are disambiguation
attempts of one stochastic edge with a traversable and an untraversable
outcome, and LEAF nodes are terminal states (every reachable target visited,
robot back at the start node).
"""
from __future__ import annotations

import gc
import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import networkx as nx

from .graph import (AMBIGUOUS, TRAVERSABLE, UNTRAVERSABLE, GraphError, RobotState,
                    StochasticGraph, definitively_reachable_set, dijkstra, known_subgraph,
                    optimistic_subgraph, reachable_set, refine, shortest_path)
from .tsp import set_route

log = logging.getLogger(__name__)

OR = "OR"
AND = "AND"
LEAF = "LEAF"

DEFAULT_MAX_STOCHASTIC = 12
# ambiguous edges the heuristic conditions on (2^n outcomes per state)
DEFAULT_BRANCH_EDGES = 6


class SizeCapError(ValueError):
    """Instance has more stochastic edges than the configured cap."""


class SearchError(RuntimeError):
    """AO* operation applied to a tree in the wrong status."""


class Arc(NamedTuple):
    """Edge of the AND-OR graph; ``prob`` is set on outcome arcs of AND nodes only."""
    node: "AONode"
    cost: float
    prob: float | None
    path: tuple


@dataclass(eq=False)
class AONode:
    kind: str
    state: RobotState
    # stochastic index attempted by an AND node
    edge: int | None = None
    f: float = 0.0
    h: float = 0.0
    solved: bool = False
    expanded: bool = False
    children: list[Arc] = field(default_factory=list)
    parents: list[tuple["AONode", Arc]] = field(default_factory=list)
    # marked arc of an expanded OR node
    best: Arc | None = None
    id: int = 0
    # topological rank: attempts fix one more edge state, AND nodes sit above their OR parent
    level: int = field(init=False)

    def __post_init__(self):
        info = self.state.info
        self.level = 2 * (len(info) - info.count(AMBIGUOUS)) + (self.kind == AND)

    def add(self, child: "AONode", cost: float = 0.0, prob: float | None = None,
            path: tuple = ()) -> Arc:
        arc = Arc(child, cost, prob, path)
        child.parents.append((self, arc))
        self.children.append(arc)
        return arc

    def walk(self) -> Iterator["AONode"]:
        """Every distinct node reachable from this one, depth first."""
        seen = {id(self)}
        stack = [self]
        while stack:
            n = stack.pop()
            yield n
            for arc in reversed(n.children):
                if id(arc.node) not in seen:
                    seen.add(id(arc.node))
                    stack.append(arc.node)

    def __repr__(self):
        s = self.state
        return (f"AONode#{self.id}({self.kind}, at={s.at}, S={sorted(s.visited)}, I={s.info!r}, "
                f"edge={self.edge}, f={self.f:.6g}, solved={self.solved})")


def best_child(node: AONode) -> Arc | None:
    """Argmin of f + arc cost; lowest child index wins ties."""
    if not node.children:
        return None
    return min(node.children, key=lambda a: a.node.f + a.cost)


def and_value(node: AONode) -> float:
    # zero-probability outcomes contribute nothing, even when infinite
    return math.fsum(a.prob * (a.node.f + a.cost) for a in node.children if a.prob > 0.0)


def select_node(root: AONode) -> AONode:
    """Descend the most promising partial policy down to an unexpanded node."""
    if root.solved:
        raise SearchError("select_node called on a solved graph")
    n = root
    while n.expanded:
        if n.kind == OR:
            n = n.best.node
        else:
            n = next(a.node for a in n.children if not a.node.solved)
    return n


def _update(n: AONode) -> None:
    if n.kind == OR and n.expanded:
        best = n.best = best_child(n)
        if best is None:
            n.f, n.solved = math.inf, True
        else:
            n.f = best.node.f + best.cost
            n.solved = best.node.solved
    elif n.kind == AND and n.expanded:
        n.f = and_value(n)
        n.solved = all(a.node.solved for a in n.children)


def backprop(node: AONode) -> None:
    """Recompute cost-to-go and solved flags from ``node`` through all its ancestors.

    Ancestors are revisited in decreasing topological rank, so every node is
    updated after all of its changed descendants. An OR parent is revisited
    only when the changed child is its marked arc or now matches its value.
    """
    heap = [(-node.level, 0, node)]
    queued = {id(node)}
    tie = 1
    while heap:
        _, _, n = heapq.heappop(heap)
        queued.discard(id(n))
        before = (n.f, n.solved)
        _update(n)
        if n is not node and (n.f, n.solved) == before:
            continue
        for p, arc in n.parents:
            if id(p) in queued:
                continue
            if p.kind == OR and p.best is not arc and n.f + arc.cost > p.f:
                continue
            queued.add(id(p))
            heapq.heappush(heap, (-p.level, tie, p))
            tie += 1


def _blocked_mask(info: str) -> str:
    """Optimistic distances depend only on which edges are known blocked."""
    return info.replace(TRAVERSABLE, AMBIGUOUS)


@dataclass
class AOTree:
    """Explicit part of the AND-OR graph; states reached along several routes share a node."""
    root: AONode
    size: int = 1
    expansions: int = 0
    root_f_trace: list[float] = field(default_factory=list)

    def nodes(self) -> Iterator[AONode]:
        return self.root.walk()


@dataclass(eq=False)
class PolicyNode:
    id: int
    kind: str
    state: RobotState
    f: float
    arc_cost: float
    arc_prob: float | None
    path: tuple
    edge: int | None
    children: list["PolicyNode"] = field(default_factory=list)

    def walk(self) -> Iterator["PolicyNode"]:
        stack = [self]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(n.children))


@dataclass
class Policy:
    root: PolicyNode
    expected_cost: float
    graph: StochasticGraph = field(repr=False)

    def nodes(self) -> list[PolicyNode]:
        return list(self.root.walk())

    def to_dict(self) -> dict:
        g = self.graph
        out = []
        for n in self.root.walk():
            if n.kind == AND:
                e = g.stochastic_edge(n.edge)
                action = {"type": "attempt", "edge": n.edge, "from": n.state.at,
                          "to": e.other(n.state.at)}
            elif n.kind == OR:
                nxt = n.children[0]
                action = {"type": "move", "path": list(nxt.path)}
            else:
                action = {"type": "done"}
            out.append({
                "id": n.id,
                "kind": n.kind,
                "state": {"at": n.state.at, "visited": sorted(n.state.visited),
                          "info": n.state.info},
                "action": action,
                "arc_cost": n.arc_cost,
                "arc_prob": n.arc_prob,
                "f": n.f,
                "children": [c.id for c in n.children],
            })
        return {"root": self.root.id, "expected_cost": self.expected_cost, "nodes": out}


@dataclass
class SolveResult:
    tree: AOTree
    policy: Policy | None

    @property
    def feasible(self) -> bool:
        return self.policy is not None


class PCCTPSolver:
    """AO* for the partial covering Canadian traveller problem on one graph.

    ``blocked_cost_factor`` scales the cost charged for an attempt that finds
    the edge untraversable (the robot stays at the near endpoint).
    """

    def __init__(self, graph: StochasticGraph, blocked_cost_factor: float = 1.0,
                 max_stochastic: int = DEFAULT_MAX_STOCHASTIC, branch_edges: int = DEFAULT_BRANCH_EDGES):
        if graph.k > max_stochastic:
            raise SizeCapError(f"instance has k={graph.k} stochastic edges, cap is {max_stochastic}")
        if blocked_cost_factor < 0:
            raise ValueError("blocked_cost_factor must be non-negative")
        self.graph = graph
        self.blocked_cost_factor = blocked_cost_factor
        self.branch_edges = branch_edges
        self._h_memo: dict[RobotState, float | None] = {}
        self._block_trees: dict[str, tuple] = {}
        self._block_paths: dict[tuple, tuple] = {}
        self._next_id = 0
        self._nodes: dict[tuple, AONode] = {}
        self._succ_memo: dict[RobotState, list] = {}
        self._terminal_memo: dict[RobotState, bool] = {}
        self._attempt_memo: dict[tuple, float | None] = {}
        self._crit_memo: dict[tuple, frozenset] = {}
        self._route_memo: dict[tuple, float | None] = {}
        self._rows_memo: dict[str, dict] = {}
        self._outcome_memo: dict[tuple, list] = {}

    # -- heuristic ---------------------------------------------------------

    def is_terminal(self, state: RobotState) -> bool:
        done = self._terminal_memo.get(state)
        if done is None:
            g = self.graph
            done = state.at == g.start and reachable_set(g, state.at, state.info) <= state.visited
            self._terminal_memo[state] = done
        return done

    def critical_edges(self, state: RobotState, target: int) -> frozenset[int]:
        """Ambiguous stochastic indices lying on some simple path from ``state.at`` to ``target``.

        An edge lies on a simple path between two vertices iff its biconnected
        block lies on the block-cut tree path between them.
        """
        key = (state.at, state.info, target)
        crit = self._crit_memo.get(key)
        if crit is None:
            crit = self._crit_memo[key] = self._critical(state, target)
        return crit

    def _critical(self, state: RobotState, target: int) -> frozenset[int]:
        mask = _blocked_mask(state.info)
        key = (state.at, mask, target)
        on_path = self._block_paths.get(key)
        if on_path is None:
            tree, blocks = self._block_tree(mask)
            path = nx.shortest_path(tree, ("V", state.at), ("V", target))
            stoch = self.graph.stochastic_of
            on_path = self._block_paths[key] = tuple(sorted(
                stoch[pos] for kind, ident in path if kind == "B"
                for pos in blocks[ident] if pos in stoch))
        return frozenset(i for i in on_path if state.info[i] == AMBIGUOUS)

    def _block_tree(self, mask: str):
        # blocks depend only on which edges are known blocked
        cached = self._block_trees.get(mask)
        if cached is not None:
            return cached
        g = self.graph
        G = nx.Graph()
        G.add_nodes_from(g.node_ids)
        for pos in sorted(optimistic_subgraph(g, mask)):
            e = g.edges[pos]
            G.add_edge(e.u, e.v, pos=pos)
        blocks = []
        tree = nx.Graph()
        tree.add_nodes_from(("V", v) for v in g.node_ids)
        for bi, block in enumerate(nx.biconnected_component_edges(G)):
            positions = {G.edges[u, v]["pos"] for u, v in block}
            blocks.append(positions)
            for u, v in block:
                tree.add_edge(("B", bi), ("V", u))
                tree.add_edge(("B", bi), ("V", v))
        self._block_trees[mask] = (tree, blocks)
        return tree, blocks

    def heuristic(self, state: RobotState) -> float | None:
        """Admissible lower bound on the cost-to-go from ``state``.

        Relaxed problem: visit every definitively reachable unvisited target,
        and for every target that may turn out unreachable visit an endpoint
        of one of its critical edges, then return to start. Distances assume
        all ambiguous edges traversable, which keeps the bound valid in every
        possible world. Returns ``None`` if the relaxed route does not exist.
        """
        if state in self._h_memo:
            return self._h_memo[state]
        g = self.graph
        if self.is_terminal(state):
            self._h_memo[state] = 0.0
            return 0.0
        reach = reachable_set(g, state.at, state.info)
        definite = definitively_reachable_set(g, state.at, state.info)
        groups = [frozenset({t}) for t in sorted(definite - state.visited)]
        for j in sorted(reach - definite - state.visited):
            ends = set()
            for i in self.critical_edges(state, j):
                e = g.stochastic_edge(i)
                ends.update((e.u, e.v))
            group = frozenset(ends)
            if group not in groups:
                groups.append(group)
        key = (state.at, _blocked_mask(state.info), tuple(groups))
        if key not in self._route_memo:
            rows = self._distance_rows(state.info)
            res = set_route(lambda u, v: rows[u].get(v, math.inf), state.at, groups, g.start)
            self._route_memo[key] = None if res is None else res[0]
        value = self._route_memo[key]
        if value is not None:
            crit = set()
            for j in reach - definite - state.visited:
                crit |= self.critical_edges(state, j)
            value = self._branch_bound(state, value, crit)
        self._h_memo[state] = value
        return value

    def _branch_bound(self, state: RobotState, base: float, crit: set) -> float:
        """Tighten ``base`` by conditioning on a few ambiguous edges.

        For each outcome of the branched edges, any policy must still visit
        every target that stays connected when the remaining ambiguous edges
        are blocked, and it can travel no shorter than if they were open. The
        per-outcome bound is the larger of that tour and ``base``, which holds
        in every world; their expectation is again a lower bound.
        """
        g = self.graph
        info = state.info
        amb = [i for i, c in enumerate(info) if c == AMBIGUOUS]
        if not amb or self.branch_edges <= 0:
            return base
        branch = tuple(sorted(amb, key=lambda i: (i not in crit, i))[:self.branch_edges])
        total = []
        for w, mask, prob in self._outcomes(info, branch):
            must = definitively_reachable_set(g, state.at, w) - state.visited
            key = (state.at, mask, must)
            tour_cost = self._route_memo.get(key)
            if tour_cost is None:
                rows = self._distance_rows(w)
                res = set_route(lambda u, v: rows[u].get(v, math.inf), state.at,
                                [frozenset({t}) for t in sorted(must)], g.start)
                tour_cost = self._route_memo[key] = 0.0 if res is None else res[0]
            total.append(prob * max(base, tour_cost))
        return math.fsum(total)

    def _outcomes(self, info: str, branch: tuple) -> list[tuple[str, str, float]]:
        """``(info, blocked mask, probability)`` for every joint outcome of ``branch``."""
        key = (info, branch)
        out = self._outcome_memo.get(key)
        if out is None:
            out = []
            probs = [self.graph.stochastic_edge(i).block_prob for i in branch]
            for outcome in itertools.product((TRAVERSABLE, UNTRAVERSABLE), repeat=len(branch)):
                w = list(info)
                prob = 1.0
                for i, p, o in zip(branch, probs, outcome):
                    w[i] = o
                    prob *= p if o == UNTRAVERSABLE else 1.0 - p
                if prob > 0.0:
                    w = "".join(w)
                    out.append((w, _blocked_mask(w), prob))
            self._outcome_memo[key] = out
        return out

    def _distance_rows(self, info: str) -> dict[int, dict[int, float]]:
        """All-pairs shortest distances assuming every ambiguous edge traversable."""
        mask = _blocked_mask(info)
        rows = self._rows_memo.get(mask)
        if rows is None:
            g = self.graph
            opt = optimistic_subgraph(g, info)
            rows = self._rows_memo[mask] = {u: dijkstra(g, opt, u)[0] for u in g.node_ids}
        return rows

    def attempt_heuristic(self, state: RobotState, i: int) -> float | None:
        """Lower bound for attempting stochastic edge ``i`` from ``state``: the
        outcome-weighted heuristic of the two successor states."""
        key = (state, i)
        if key not in self._attempt_memo:
            self._attempt_memo[key] = self._attempt_bound(state, i)
        return self._attempt_memo[key]

    def _attempt_bound(self, state: RobotState, i: int) -> float | None:
        total = []
        for nxt, cost, prob, _ in self.and_outcomes(state, i):
            if prob == 0.0:
                continue
            h = 0.0 if self.is_terminal(nxt) else self.heuristic(nxt)
            if h is None:
                return None
            total.append(prob * (cost + h))
        return math.fsum(total)

    # -- expansion -----------------------------------------------------------

    def _node(self, kind: str, state: RobotState, edge: int | None = None) -> AONode:
        """The unique node for ``(kind, state, edge)``, created and valued on first use."""
        if kind == OR and self.is_terminal(state):
            kind = LEAF
        key = (kind, state, edge)
        node = self._nodes.get(key)
        if node is None:
            node = self._nodes[key] = AONode(kind, state, edge, id=self._next_id)
            self._next_id += 1
            self._init_value(node)
        return node

    def _init_value(self, node: AONode) -> AONode:
        if node.kind == LEAF:
            node.f = node.h = 0.0
            node.solved = True
            return node
        if node.kind == AND:
            h = self.attempt_heuristic(node.state, node.edge)
        else:
            h = self.heuristic(node.state)
        node.h = node.f = math.inf if h is None else h
        if h is None:
            node.solved = True
        return node

    def make_root(self) -> AONode:
        return self._node(OR, self.graph.root_state())

    def or_successors(self, state: RobotState) -> list:
        """Macro actions available at an OR state.

        Yields ``(kind, next_state, edge, cost, path)`` tuples: one AND
        successor per non-dominated (visited set, endpoint) label and
        ambiguous edge at that endpoint, then at most one LEAF successor
        covering all reachable targets and returning to start.
        """
        succ = self._succ_memo.get(state)
        if succ is None:
            succ = self._succ_memo[state] = list(self._or_successors(state))
        return succ

    def _or_successors(self, state: RobotState):
        g = self.graph
        info = state.info
        known = known_subgraph(g, info)
        reach = reachable_set(g, state.at, info)

        def hop(v, t, S):
            pr = shortest_path(g, known, v, t)
            if pr is None:
                return None
            return S | (frozenset(pr.path) & reach), pr

        # label-correcting search over (visited set, waypoint) with target waypoints
        labels = {(state.visited, state.at): (0.0, (state.at,))}
        frontier = [(state.visited, state.at)]
        while frontier:
            frontier.sort(key=lambda key: (labels[key][0], key[1], sorted(key[0])))
            S, v = key = frontier.pop(0)
            cost, path = labels[key]
            for t in sorted(reach - S):
                step = hop(v, t, S)
                if step is None:
                    continue
                S2, pr = step
                c2 = cost + pr.cost
                k2 = (S2, t)
                if k2 not in labels or c2 < labels[k2][0]:
                    labels[k2] = (c2, path + tuple(pr.path[1:]))
                    if k2 not in frontier:
                        frontier.append(k2)

        ordered = sorted(labels.items(), key=lambda kv: (kv[1][0], kv[0][1], sorted(kv[0][0])))

        ambiguous_at: dict[int, list[int]] = {}
        for i, st in enumerate(info):
            if st == AMBIGUOUS:
                e = g.stochastic_edge(i)
                ambiguous_at.setdefault(e.u, []).append(i)
                ambiguous_at.setdefault(e.v, []).append(i)

        for b in sorted(ambiguous_at):
            cands: dict[frozenset, tuple[float, tuple]] = {}
            for (S, v), (cost, path) in ordered:
                step = hop(v, b, S)
                if step is None:
                    continue
                S2, pr = step
                c2 = cost + pr.cost
                if S2 not in cands or c2 < cands[S2][0]:
                    cands[S2] = (c2, path + tuple(pr.path[1:]))
            kept = [(S, c, p) for S, (c, p) in cands.items()
                    if not any(S2 > S and c2 <= c for S2, (c2, _) in cands.items())]
            kept.sort(key=lambda x: (x[1], sorted(x[0])))
            for S, c, p in kept:
                for i in ambiguous_at[b]:
                    yield AND, RobotState(b, S, info), i, c, p

        finish = None
        for (S, v), (cost, path) in ordered:
            if not reach <= S:
                continue
            step = hop(v, g.start, S)
            if step is None:
                continue
            S2, pr = step
            total = cost + pr.cost
            if finish is None or total < finish[0]:
                finish = (total, S2, path + tuple(pr.path[1:]))
        if finish is not None:
            total, S2, path = finish
            yield LEAF, RobotState(g.start, S2, info), None, total, path

    def expand_or(self, node: AONode) -> list[Arc]:
        if node.kind != OR or node.expanded:
            raise SearchError(f"expand_or needs an unexpanded OR node, got {node!r}")
        for kind, state, edge, cost, path in self.or_successors(node.state):
            node.add(self._node(kind, state, edge), cost, None, path)
        node.expanded = True
        if not node.children:
            log.debug("dead end at %r", node)
        return node.children

    def and_outcomes(self, state: RobotState, i: int):
        """``[(next_state, cost, prob, path)]`` for the traversable then untraversable outcome."""
        g = self.graph
        if not 0 <= i < g.k:
            raise GraphError(f"edge index {i} is not a stochastic edge")
        if state.info[i] != AMBIGUOUS:
            raise GraphError(f"stochastic edge {i} is not ambiguous in {state.info!r}")
        e = g.stochastic_edge(i)
        if state.at not in e.pair:
            raise GraphError(f"stochastic edge {i} is not incident to node {state.at}")
        far = e.other(state.at)
        t_state = RobotState(far, state.visited | (frozenset({far}) & g.targets),
                             refine(state.info, i, TRAVERSABLE))
        u_state = RobotState(state.at, state.visited, refine(state.info, i, UNTRAVERSABLE))
        return [(t_state, e.cost, 1.0 - e.block_prob, (state.at, far)),
                (u_state, e.cost * self.blocked_cost_factor, e.block_prob, (state.at,))]

    def expand_and(self, node: AONode) -> list[Arc]:
        if node.kind != AND or node.expanded:
            raise SearchError(f"expand_and needs an unexpanded AND node, got {node!r}")
        for state, cost, prob, path in self.and_outcomes(node.state, node.edge):
            node.add(self._node(OR, state), cost, prob, path)
        node.expanded = True
        return node.children

    def expand(self, node: AONode) -> list[Arc]:
        if node.kind == OR:
            return self.expand_or(node)
        if node.kind == AND:
            return self.expand_and(node)
        raise SearchError("leaf nodes cannot be expanded")

    # -- main loop -------------------------------------------------------------

    def solve(self) -> SolveResult:
        root = self.make_root()
        tree = AOTree(root)
        tree.root_f_trace.append(root.f)
        # the search only allocates; cyclic GC passes over the growing graph are pure overhead
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            while not root.solved:
                n = select_node(root)
                self.expand(n)
                tree.expansions += 1
                backprop(n)
                tree.root_f_trace.append(root.f)
        finally:
            if was_enabled:
                gc.enable()
        tree.size = len(self._nodes)
        log.info("AO* finished: %d expansions, %d nodes, f=%s", tree.expansions, tree.size, root.f)
        if math.isinf(root.f):
            return SolveResult(tree, None)
        return SolveResult(tree, extract_policy(tree, self.graph))


def solve(graph: StochasticGraph, blocked_cost_factor: float = 1.0,
          max_stochastic: int = DEFAULT_MAX_STOCHASTIC) -> SolveResult:
    return PCCTPSolver(graph, blocked_cost_factor, max_stochastic).solve()


def extract_policy(tree: AOTree, graph: StochasticGraph) -> Policy:
    """Keep the argmin arc at OR nodes and every outcome at AND nodes."""
    if not tree.root.solved:
        raise SearchError("cannot extract a policy from an unsolved tree")

    def build(arc: Arc) -> PolicyNode:
        n = arc.node
        pn = PolicyNode(n.id, n.kind, n.state, n.f, arc.cost, arc.prob, arc.path, n.edge)
        if n.kind == OR:
            pn.children.append(build(best_child(n)))
        elif n.kind == AND:
            pn.children.extend(build(a) for a in n.children)
        return pn

    root = build(Arc(tree.root, 0.0, None, ()))
    return Policy(root, tree.root.f, graph)


_DOT_COLOURS = {"policy": "green", "expanded": "yellow", "terminated": "orange"}


def classify_tree(tree: AOTree, policy: Policy | None) -> dict[int, str]:
    """Label AO nodes as ``policy``, ``expanded`` (off-policy) or ``terminated`` (never expanded)."""
    on_policy = {n.id for n in policy.root.walk()} if policy else set()
    labels = {}
    for n in tree.nodes():
        if n.id in on_policy:
            labels[n.id] = "policy"
        elif n.expanded:
            labels[n.id] = "expanded"
        else:
            labels[n.id] = "terminated"
    return labels


def tree_to_dot(tree: AOTree, policy: Policy | None) -> str:
    labels = classify_tree(tree, policy)
    lines = ["digraph ao_tree {"]
    for n in tree.nodes():
        shape = "ellipse" if n.kind == AND else "box"
        text = f"{n.state.at} {{{','.join(map(str, sorted(n.state.visited)))}}} {n.state.info}"
        if n.kind == AND:
            text += f" e{n.edge}"
        text += f"\\nf={n.f:.6g}"
        lines.append(f'  n{n.id} [label="{text}", shape={shape}, style=filled, '
                     f'fillcolor={_DOT_COLOURS[labels[n.id]]}, class="{labels[n.id]}"];')
    for n in tree.nodes():
        for a in n.children:
            label = f"{a.cost:.6g}" if a.prob is None else f"{a.cost:.6g} p={a.prob:.3g}"
            lines.append(f'  n{n.id} -> n{a.node.id} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
