"""Sub-tour re-optimisation with fixed endpoints.

The tour is cut into consecutive paths of `l_s` vertices where neighbouring
paths share one boundary vertex. Each path is re-solved with both ends
pinned, so splicing it back always leaves a valid cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .instance import Tour
from .lk import LkProblem, lk_path_solve, lk_solve, path_length


@dataclass
class SubtourPlan:
    """Segments as lists of tour positions, starting at `start` (a position)."""

    start: int
    segments: list[np.ndarray]


@dataclass
class SegmentAudit:
    pass_index: int
    start_position: int
    size: int
    before: float
    after: float


@dataclass
class SubtourResult:
    tour: Tour
    passes: list[tuple[float, float]] = field(default_factory=list)
    audit: list[SegmentAudit] = field(default_factory=list)


def plan_segments(n: int, l_s: int, start: int = 0) -> SubtourPlan:
    """Closed position ranges of l_s vertices; consecutive ranges share an end.

    The last range wraps back to `start` and may be shorter. A range under
    three vertices is dropped because its interior is empty.
    """
    if l_s < 3:
        raise ValueError("l_s must be >= 3")
    stride = l_s - 1
    segments = []
    offset = 0
    while offset < n:
        size = min(l_s, n - offset + 1)
        if size >= 3:
            segments.append((start + offset + np.arange(size)) % n)
        offset += stride
    return SubtourPlan(start, segments)


def pass_offset(p: int, l_s: int, i3: int) -> int:
    return (p * l_s) // (i3 + 1)


def optimize_subtours(tour: Tour, l_s: int = 100, i3: int = 2, seed=0, kicks: int = 0,
                      random_starts: bool = False) -> SubtourResult:
    """Run `i3` passes of fixed-endpoint path LK over the tour.

    Pass p starts at position floor(p * l_s / (i3 + 1)), or at a random
    position when `random_starts` is set. Every segment solve is seeded with
    its current path, so the length never increases. The input tour is not
    modified.
    """
    tour = tour.copy()
    coords = np.ascontiguousarray(tour.instance.coords)
    n = tour.n
    rng = np.random.default_rng(seed)
    result = SubtourResult(tour)
    if n <= 3:
        return result
    if n <= l_s - 1:
        # The whole tour fits in one segment; there is nothing to pin.
        for p in range(1, i3 + 1):
            before = tour.length
            res = lk_solve(LkProblem(coords, start_tour=tour.order), seed=int(rng.integers(2**32)),
                           kicks=kicks)
            if res.length < before:
                previous = tour.order
                tour.set_order(res.tour)
                if tour.length > before:
                    tour.set_order(previous)
            result.passes.append((before, tour.length))
        return result
    for p in range(1, i3 + 1):
        before_pass = tour.length
        start = int(rng.integers(n)) if random_starts else pass_offset(p, l_s, i3) % n
        for positions in plan_segments(n, l_s, start).segments:
            verts = tour.order[positions]
            local = coords[verts]
            m = len(verts)
            old = path_length(local, np.arange(m))
            path = lk_path_solve(local, 0, m - 1, seed=int(rng.integers(2**32)),
                                 start_path=np.arange(m), kicks=kicks)
            new = path_length(local, path)
            if new < old:
                before = tour.length
                tour.order[positions] = verts[path]
                tour.refresh()
                if tour.length > before:
                    # Gain lost to summation order; undo.
                    tour.order[positions] = verts
                    tour.refresh()
                    new = old
            result.audit.append(SegmentAudit(p, int(positions[0]), m, old, min(new, old)))
        result.passes.append((before_pass, tour.length))
    return result
