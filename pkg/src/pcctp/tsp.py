"""Exact subset dynamic programming for (generalized) travelling-salesman routes.

A route starts at ``start``, passes through at least one node of every group,
and ends at ``end``. Plain TSP is the special case of singleton groups.
"""
from __future__ import annotations

import math
from typing import Callable, Hashable, Sequence


def set_route(dist: Callable[[Hashable, Hashable], float], start, groups: Sequence[frozenset],
              end) -> tuple[float, list] | None:
    """Cheapest start→end route touching every group; ``None`` if no finite route exists.

    Returns ``(cost, waypoints)`` where waypoints are the group nodes in
    visiting order followed by ``end``.
    """
    groups = [frozenset(gr) for gr in groups]
    if any(not gr for gr in groups):
        return None
    m = len(groups)
    full = (1 << m) - 1

    def cover(node) -> int:
        mask = 0
        for i, gr in enumerate(groups):
            if node in gr:
                mask |= 1 << i
        return mask

    candidates = sorted(set().union(*groups), key=repr) if groups else []
    cmask = {w: cover(w) for w in candidates}
    end_mask = cover(end)

    init = (cover(start), start)
    best = {init: 0.0}
    parent: dict = {init: None}
    by_mask: dict[int, list] = {init[0]: [start]}
    for mask in range(full + 1):
        for v in by_mask.get(mask, ()):
            base = best[(mask, v)]
            for w in candidates:
                new = mask | cmask[w]
                if new == mask:
                    continue
                d = dist(v, w)
                if math.isinf(d):
                    continue
                key = (new, w)
                if key not in best or base + d < best[key]:
                    if key not in best:
                        by_mask.setdefault(new, []).append(w)
                    best[key] = base + d
                    parent[key] = (mask, v)

    answer = None
    for (mask, v), cost in best.items():
        if mask | end_mask != full:
            continue
        d = dist(v, end)
        if math.isinf(d):
            continue
        total = cost + d
        if answer is None or total < answer[0]:
            answer = (total, (mask, v))
    if answer is None:
        return None
    total, key = answer
    order = []
    while parent[key] is not None:
        order.append(key[1])
        key = parent[key]
    order.reverse()
    order.append(end)
    return total, order


def tour(dist, start, required, end=None) -> tuple[float, list] | None:
    """Cheapest route from ``start`` visiting every node of ``required`` then ``end``."""
    end = start if end is None else end
    return set_route(dist, start, [frozenset({r}) for r in sorted(required)], end)
