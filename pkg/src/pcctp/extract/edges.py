"""Candidate edges from a classified raster: pinch points, A* paths, windy edges."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import ndimage

from .grid import astar, dijkstra_cells, neighbours, polyline_length, segment_cells, shortcut, trace
from .raster import DETERMINISTIC, LAND, STOCHASTIC, PixelGrid, WaterMaskRaster

PINCH = "pinch"
WINDY = "windy"
DETERMINISTIC_EDGE = "deterministic"

SNAP_RADIUS_CELLS = 5


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateEdge:
    a: tuple[int, int]
    b: tuple[int, int]
    pixel_path: tuple      # cells for pinch/raw paths, polyline vertices once smoothed
    length: float          # metres
    block_prob: float
    kind: str

    def with_kind(self, kind: str, block_prob: float) -> "CandidateEdge":
        return CandidateEdge(self.a, self.b, self.pixel_path, self.length, block_prob, kind)


def dbscan(points: np.ndarray, eps: float, min_pts: int = 1) -> list[int]:
    """Cluster labels (``-1`` for noise) by density-based clustering in Euclidean space."""
    n = len(points)
    if n == 0:
        return []
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    neigh = [np.flatnonzero(d[i] <= eps) for i in range(n)]
    core = [len(nb) >= min_pts for nb in neigh]
    labels = [-1] * n
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = list(neigh[i])
        while queue:
            j = queue.pop()
            if labels[j] == -1:
                labels[j] = cluster
                if core[j]:
                    queue.extend(neigh[j])
        cluster += 1
    return labels


def detect_pinch_points(grid: PixelGrid, raster: WaterMaskRaster, search_radius_m: float = 300.0,
                        dbscan_eps_m: float = 50.0, dbscan_min_pts: int = 1) -> list[CandidateEdge]:
    """Stochastic-water shortcuts between boundary cells, one per DBSCAN cluster.

    From each boundary cell, the shortest paths whose interior cells are all
    stochastic water reach other boundary cells within ``search_radius_m``. A
    path is a shortcut when it is strictly shorter than the deterministic-water
    distance between its endpoints (or the endpoints are not connected through
    deterministic water). Blocking probability is one minus the smallest water
    probability along the interior.
    """
    labels = grid.labels
    shape = labels.shape
    res = raster.resolution
    boundary = grid.boundary
    limit = search_radius_m / res

    def stoch_ok(cell):
        return labels[cell] == STOCHASTIC or boundary[cell]

    def water(cell):
        return labels[cell] != LAND

    def det_ok(cell):
        return labels[cell] == DETERMINISTIC

    candidates = []
    for src in zip(*np.nonzero(boundary)):
        src = (int(src[0]), int(src[1]))
        if not any(True for _ in neighbours(src, shape, lambda c: labels[c] == STOCHASTIC, water)):
            continue
        dist, pred = dijkstra_cells(src, shape, stoch_ok, limit,
                                    expand=lambda c: labels[c] == STOCHASTIC, corner_ok=water)
        ends = sorted(c for c in dist if c > src and boundary[c] and dist[c] > 0)
        # first step must leave deterministic water
        ends = [c for c in ends if labels[trace(pred, src, c)[1]] == STOCHASTIC]
        if not ends:
            continue
        longest = max(dist[c] for c in ends)
        det_dist, _ = dijkstra_cells(src, shape, det_ok, longest)
        for end in ends:
            if det_dist.get(end, math.inf) <= dist[end] + 1e-9:
                continue
            path = tuple(trace(pred, src, end))
            interior = path[1:-1]
            min_prob = min(float(raster.probs[c]) for c in interior)
            candidates.append(CandidateEdge(src, end, path, dist[end] * res, 1.0 - min_prob, PINCH))

    if not candidates:
        return []
    mids = np.array([[(e.a[0] + e.b[0]) / 2 * res, (e.a[1] + e.b[1]) / 2 * res] for e in candidates])
    cluster = dbscan(mids, dbscan_eps_m, dbscan_min_pts)
    best: dict[int, CandidateEdge] = {}
    for lab, e in zip(cluster, candidates):
        if lab == -1:
            continue
        cur = best.get(lab)
        if cur is None or (e.length, e.a, e.b) < (cur.length, cur.a, cur.b):
            best[lab] = e
    return [best[lab] for lab in sorted(best)]


def snap_to_water(grid: PixelGrid, cell, radius: int = SNAP_RADIUS_CELLS):
    """Nearest deterministic-water cell within ``radius`` cells (ties: lowest row, col)."""
    labels = grid.labels
    h, w = labels.shape
    r0, c0 = cell
    best = None
    for r in range(r0 - radius, r0 + radius + 1):
        for c in range(c0 - radius, c0 + radius + 1):
            if not (0 <= r < h and 0 <= c < w) or labels[r, c] != DETERMINISTIC:
                continue
            d = math.hypot(r - r0, c - c0)
            if d <= radius and (best is None or (d, r, c) < best):
                best = (d, r, c)
    if best is None:
        raise ExtractionError(f"no deterministic water within {radius} cells of cell {cell}")
    return (best[1], best[2])


def generate_paths(grid: PixelGrid, raster: WaterMaskRaster, nodes: list, seed: int = 0,
                   iterations: int = 100) -> dict[tuple[int, int], CandidateEdge]:
    """A* between every pair of node cells over deterministic water, then shortcutting.

    ``nodes`` are cells; the result maps index pairs ``(i, j)``, ``i < j``, to
    deterministic candidate edges whose ``pixel_path`` is the smoothed
    polyline. Pairs with no deterministic-water connection are absent.
    """
    passable = grid.labels == DETERMINISTIC
    for cell in nodes:
        if not passable[cell]:
            raise ExtractionError(f"node cell {cell} is not deterministic water")
    rng = random.Random(seed)
    out = {}
    for i, j in combinations(range(len(nodes)), 2):
        found = astar(nodes[i], nodes[j], passable)
        if found is None:
            continue
        raw, _ = found
        smooth = shortcut(raw, passable, rng, iterations)
        length = polyline_length(smooth) * raster.resolution
        out[(i, j)] = CandidateEdge(nodes[i], nodes[j], tuple(smooth), length, 0.0,
                                    DETERMINISTIC_EDGE)
    return out


def windy_area(grid: PixelGrid, raster: WaterMaskRaster, windy_dist_m: float = 200.0) -> np.ndarray:
    """Deterministic-water cells at least ``windy_dist_m`` from every boundary cell centre."""
    det = grid.labels == DETERMINISTIC
    if not grid.boundary.any():
        return det.copy()
    dist = ndimage.distance_transform_edt(~grid.boundary, sampling=raster.resolution)
    return det & (dist >= windy_dist_m - 1e-9)


def detect_windy_edges(grid: PixelGrid, raster: WaterMaskRaster, paths: dict,
                       windy_dist_m: float = 200.0, wind_block_prob: float = 0.1) -> dict:
    """Return ``paths`` with every deterministic edge crossing the windy area reclassified."""
    area = windy_area(grid, raster, windy_dist_m)
    out = {}
    for key, e in paths.items():
        crossed = any(area[c] for p, q in zip(e.pixel_path, e.pixel_path[1:])
                      for c in segment_cells(p, q)) if len(e.pixel_path) > 1 else area[e.a]
        out[key] = e.with_kind(WINDY, wind_block_prob) if crossed and e.kind == DETERMINISTIC_EDGE else e
    return out
