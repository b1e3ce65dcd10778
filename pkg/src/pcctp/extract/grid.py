"""8-connected grid search, cell traversal of straight segments and path smoothing."""
from __future__ import annotations

import heapq
import math
import random

import numpy as np

SQRT2 = math.sqrt(2.0)
STEPS = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
         (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2)]


def neighbours(cell, shape, ok, corner_ok=None):
    """8-neighbours of ``cell`` for which ``ok(cell)`` holds, with step lengths in cells.

    A diagonal step needs both orthogonal cells it passes between to satisfy
    ``corner_ok`` (default ``ok``); no cutting across land corners.
    """
    corner_ok = ok if corner_ok is None else corner_ok
    r, c = cell
    h, w = shape
    for dr, dc, step in STEPS:
        nr, nc = r + dr, c + dc
        if not (0 <= nr < h and 0 <= nc < w) or not ok((nr, nc)):
            continue
        if dr and dc and not (corner_ok((r + dr, c)) and corner_ok((r, c + dc))):
            continue
        yield (nr, nc), step


def dijkstra_cells(source, shape, ok, limit=math.inf, expand=None, corner_ok=None):
    """Distances (in cells) from ``source`` over cells where ``ok`` holds.

    Cells for which ``expand`` returns False are reached but not expanded
    further. Returns ``(dist, pred)`` dictionaries.
    """
    dist = {source: 0.0}
    pred = {}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in done:
            continue
        done.add(cell)
        if cell != source and expand is not None and not expand(cell):
            continue
        for nb, step in neighbours(cell, shape, ok, corner_ok):
            nd = d + step
            if nd > limit + 1e-9 or nb in done:
                continue
            if nb not in dist or nd < dist[nb]:
                dist[nb] = nd
                pred[nb] = cell
                heapq.heappush(heap, (nd, nb))
    return dist, pred


def trace(pred, source, target):
    path = [target]
    while path[-1] != source:
        path.append(pred[path[-1]])
    path.reverse()
    return path


def astar(start, goal, passable: np.ndarray):
    """Shortest 8-connected path over ``passable`` cells; ``None`` if disconnected."""
    shape = passable.shape

    def ok(cell):
        return bool(passable[cell])

    def octile(cell):
        dr, dc = abs(cell[0] - goal[0]), abs(cell[1] - goal[1])
        return (SQRT2 - 1.0) * min(dr, dc) + max(dr, dc)

    g = {start: 0.0}
    pred = {}
    heap = [(octile(start), 0, start)]
    tie = 0
    closed = set()
    while heap:
        _, _, cell = heapq.heappop(heap)
        if cell == goal:
            return trace(pred, start, goal), g[goal]
        if cell in closed:
            continue
        closed.add(cell)
        for nb, step in neighbours(cell, shape, ok):
            ng = g[cell] + step
            if nb not in g or ng < g[nb] - 1e-12:
                g[nb] = ng
                pred[nb] = cell
                tie += 1
                heapq.heappush(heap, (ng + octile(nb), tie, nb))
    return None


def segment_cells(a, b):
    """Every cell the straight segment between the centres of cells ``a`` and ``b`` touches.

    Grid traversal in the style of Amanatides and Woo; where the segment passes
    exactly through a cell corner both side cells are included.
    """
    (r0, c0), (r1, c1) = a, b
    cells = [(r0, c0)]
    dr, dc = r1 - r0, c1 - c0
    sr = (dr > 0) - (dr < 0)
    sc = (dc > 0) - (dc < 0)
    # parametric distance to the first row/col boundary and between boundaries
    t_dr = abs(1.0 / dr) if dr else math.inf
    t_dc = abs(1.0 / dc) if dc else math.inf
    t_r = 0.5 * t_dr
    t_c = 0.5 * t_dc
    r, c = r0, c0
    while (r, c) != (r1, c1):
        if abs(t_r - t_c) < 1e-12:
            cells.append((r + sr, c))
            cells.append((r, c + sc))
            r, c = r + sr, c + sc
            t_r += t_dr
            t_c += t_dc
        elif t_r < t_c:
            r += sr
            t_r += t_dr
        else:
            c += sc
            t_c += t_dc
        cells.append((r, c))
    return cells


def line_clear(a, b, passable: np.ndarray) -> bool:
    h, w = passable.shape
    for r, c in segment_cells(a, b):
        if not (0 <= r < h and 0 <= c < w) or not passable[r, c]:
            return False
    return True


def polyline_length(points) -> float:
    """Length in cells of the polyline through the given cell centres."""
    return math.fsum(math.hypot(p[0] - q[0], p[1] - q[1]) for p, q in zip(points, points[1:]))


def shortcut(path, passable: np.ndarray, rng: random.Random, iterations: int = 100):
    """Randomized shortcutting followed by one greedy pass.

    A segment replaces the stretch between two path vertices only when every
    cell it touches is passable, so the result stays inside ``passable`` and
    is never longer than the input.
    """
    pts = list(path)
    for _ in range(iterations):
        if len(pts) < 3:
            break
        i, j = sorted(rng.sample(range(len(pts)), 2))
        if j - i < 2:
            continue
        if line_clear(pts[i], pts[j], passable):
            pts = pts[:i + 1] + pts[j:]
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not line_clear(pts[i], pts[j], passable):
            j -= 1
        out.append(pts[j])
        i = j
    return out
