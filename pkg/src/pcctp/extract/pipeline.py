"""Raster to stochastic graph: prune candidate edges and assemble the high-level graph."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..graph import AMBIGUOUS, Edge, Node, StochasticGraph, reachable_set
from .edges import (DETERMINISTIC_EDGE, PINCH, CandidateEdge, ExtractionError,
                    detect_pinch_points, detect_windy_edges, generate_paths, snap_to_water)
from .grid import polyline_length
from .raster import PixelGrid, WaterMaskRaster, classify_pixels

log = logging.getLogger(__name__)


@dataclass
class ExtractConfig:
    det_threshold: float = 0.9
    stoch_threshold: float = 0.5
    windy_dist_m: float = 200.0
    wind_block_prob: float = 0.1
    search_radius_m: float = 300.0
    dbscan_eps_m: float = 50.0
    dbscan_min_pts: int = 1
    seed: int = 0
    shortcut_iterations: int = 100

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExtractionResult:
    graph: StochasticGraph
    grid: PixelGrid
    pinch_points: list[CandidateEdge]
    pruned: list[CandidateEdge]
    warnings: list[str] = field(default_factory=list)


def closure(n: int, edges: dict) -> np.ndarray:
    """All-pairs shortest distances over ``{(i, j): length}`` (Floyd-Warshall)."""
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for (i, j), length in edges.items():
        if length < d[i, j]:
            d[i, j] = d[j, i] = length
    for m in range(n):
        d = np.minimum(d, d[:, m:m + 1] + d[m:m + 1, :])
    return d


def is_shortcut(dist: np.ndarray, i: int, j: int, length: float, tol: float = 1e-9) -> bool:
    """Whether a traversable ``i``-``j`` edge of ``length`` strictly shortens some node pair."""
    via = np.minimum(dist[:, i:i + 1] + length + dist[j:j + 1, :],
                     dist[:, j:j + 1] + length + dist[i:i + 1, :])
    return bool(np.any(via < dist - tol))


def _split(e: CandidateEdge, res: float):
    """Split a deterministic polyline at its arc-length midpoint."""
    pts = [tuple(map(float, p)) for p in e.pixel_path]
    half = polyline_length(pts) / 2.0
    acc = 0.0
    for k, (p, q) in enumerate(zip(pts, pts[1:])):
        seg = math.hypot(q[0] - p[0], q[1] - p[1])
        if acc + seg >= half and seg > 0:
            t = (half - acc) / seg
            mid = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
            first = tuple(pts[:k + 1]) + (mid,)
            second = (mid,) + tuple(pts[k + 1:])
            return mid, first, second
        acc += seg
    mid = pts[0]
    return mid, (mid,), tuple(pts)


def prune_and_assemble(node_cells: list, n_required: int, det_edges: dict,
                       stoch_edges: list[tuple[int, int, CandidateEdge]],
                       raster: WaterMaskRaster) -> tuple[StochasticGraph, list[CandidateEdge], list[str]]:
    """Drop stochastic edges that shorten no node pair and build the graph.

    ``node_cells[0]`` is the start, ``node_cells[1:n_required]`` the targets;
    further cells are stochastic-edge endpoints and survive only if a kept
    stochastic edge uses them. Returns ``(graph, pruned_edges, warnings)``.
    """
    res = raster.resolution
    n = len(node_cells)
    dist = closure(n, {key: e.length for key, e in det_edges.items()})
    kept, pruned = [], []
    for i, j, e in stoch_edges:
        (kept if is_shortcut(dist, i, j, e.length) else pruned).append((i, j, e))

    alive = set(range(n_required)) | {i for i, _, _ in kept} | {j for _, j, _ in kept}
    order = sorted(alive)
    new_id = {old: new for new, old in enumerate(order)}
    nodes = [Node(new_id[i], *raster.centre(node_cells[i])) for i in order]

    records = {}
    for (i, j), e in sorted(det_edges.items()):
        if i in alive and j in alive:
            records[(new_id[i], new_id[j])] = e
    stoch = {}
    for i, j, e in kept:
        a, b = sorted((new_id[i], new_id[j]))
        if (a, b) not in stoch or e.length < stoch[(a, b)].length:
            stoch[(a, b)] = e

    edges = []
    next_id = len(nodes)
    for (a, b), e in sorted(records.items()):
        if (a, b) in stoch:
            # keep one record per pair: route the deterministic path through a waypoint
            mid, first, second = _split(e, res)
            m = next_id
            next_id += 1
            nodes.append(Node(m, (mid[1] + 0.5) * res, (mid[0] + 0.5) * res))
            for u, v, part in ((a, m, first), (m, b, second)):
                edges.append(Edge(u, v, polyline_length(part) * res, e.block_prob, e.kind, part))
        else:
            edges.append(Edge(a, b, e.length, e.block_prob, e.kind, e.pixel_path))
    for (a, b), e in sorted(stoch.items()):
        edges.append(Edge(a, b, e.length, e.block_prob, e.kind, e.pixel_path))

    graph = StochasticGraph(nodes, edges, 0, range(1, n_required))
    warnings = []
    reach = reachable_set(graph, 0, AMBIGUOUS * graph.k)
    for t in sorted(graph.targets - reach):
        warnings.append(f"target node {t} is unreachable even if every stochastic edge is traversable")
    for w in warnings:
        log.warning(w)
    return graph, [e for _, _, e in pruned], warnings


def extract_graph(raster: WaterMaskRaster, start_xy, targets_xy, config: ExtractConfig | None = None
                  ) -> ExtractionResult:
    """Full pipeline from a probability raster and metric start/target positions."""
    cfg = config or ExtractConfig()
    grid = classify_pixels(raster, cfg.det_threshold, cfg.stoch_threshold)

    def snap(xy, what):
        x, y = xy
        cell = raster.cell_of(x, y)
        try:
            return snap_to_water(grid, cell)
        except ExtractionError as exc:
            raise ExtractionError(f"{what} at ({x}, {y}): {exc}") from None

    cells = [snap(start_xy, "start")]
    cells += [snap(xy, f"target {k}") for k, xy in enumerate(targets_xy)]
    n_required = len(cells)

    pinch = detect_pinch_points(grid, raster, cfg.search_radius_m, cfg.dbscan_eps_m,
                                cfg.dbscan_min_pts)
    index = {}
    for k, c in enumerate(cells):
        index.setdefault(c, k)
    stoch_edges = []
    for e in pinch:
        ends = []
        for c in (e.a, e.b):
            if c not in index:
                index[c] = len(cells)
                cells.append(c)
            ends.append(index[c])
        stoch_edges.append((ends[0], ends[1], e))

    paths = generate_paths(grid, raster, cells, cfg.seed, cfg.shortcut_iterations)
    paths = detect_windy_edges(grid, raster, paths, cfg.windy_dist_m, cfg.wind_block_prob)
    graph, pruned, warnings = prune_and_assemble(cells, n_required, paths, stoch_edges, raster)
    return ExtractionResult(graph, grid, pinch, pruned, warnings)


__all__ = ["ExtractConfig", "ExtractionResult", "extract_graph", "prune_and_assemble", "closure",
           "is_shortcut", "DETERMINISTIC_EDGE", "PINCH"]
