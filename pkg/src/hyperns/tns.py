"""Targeted neighbourhood search.

Each round scores the edges of the current tour, picks the best one,
frees every tour edge touching its endpoints' m-nearest neighbourhood,
compresses the surviving segments to fixed edges, re-solves the small
subproblem with LK and writes the result back. Statistics are kept only for
edges of the current tour, so storage is exactly n entries.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .instance import Instance, Tour
from .lk import LkProblem, lk_solve

Edge = tuple[int, int]

WEIGHT_SCALE = 100.0
WORTH_DELETION_BONUS = 10000.0
STOP_TOLERANCE = 1e-4
STOP_WINDOW = 10


def _key(a: int, b: int) -> Edge:
    a, b = int(a), int(b)
    return (a, b) if a < b else (b, a)


@dataclass
class EdgeStats:
    """W (weight), Q (rounds left undeleted) and O (exploration bonus) per tour edge."""

    W: dict[Edge, float] = field(default_factory=dict)
    Q: dict[Edge, int] = field(default_factory=dict)
    O: dict[Edge, float] = field(default_factory=dict)
    sumQ: int = 0
    peak_entries: int = 0

    @classmethod
    def from_tour(cls, tour: Tour, worth_deletion=()) -> "EdgeStats":
        stats = cls()
        worth = {_key(*e) for e in worth_deletion}
        for e in tour.edges():
            stats.add(e, tour.instance.distance(*e), WORTH_DELETION_BONUS if e in worth else 0.0)
        return stats

    def add(self, e: Edge, length: float, bonus: float = 0.0) -> None:
        self.W[e] = WEIGHT_SCALE * length
        self.Q[e] = 0
        self.O[e] = bonus
        self.peak_entries = max(self.peak_entries, len(self.W))

    def remove(self, e: Edge) -> None:
        self.sumQ -= self.Q.pop(e)
        del self.W[e]
        del self.O[e]

    def __len__(self) -> int:
        return len(self.W)

    def __contains__(self, e) -> bool:
        return e in self.W

    def keys(self):
        return self.W.keys()


def score(e: Edge, stats: EdgeStats, sumQ: int, alpha: float) -> float:
    return stats.W[e] + alpha * stats.Q[e] / (1 + sumQ) + stats.O[e]


def select_edge(stats: EdgeStats, alpha: float = 1000.0) -> Edge | None:
    """Highest-scoring edge, ties to the smaller pair; None if all are -inf."""
    best = None
    best_score = -math.inf
    scale = alpha / (1 + stats.sumQ)
    W, Q, O = stats.W, stats.Q, stats.O
    for e in W:
        s = W[e] + scale * Q[e] + O[e]
        if s > best_score or (s == best_score and best is not None and e < best):
            best, best_score = e, s
    return best


def build_destroy_set(tour: Tour, e: Edge, m: int, union: bool = True) -> tuple[list[Edge], set[int]]:
    """Tour edges with an endpoint in {a, b} plus the m-NN of a and b.

    With `union=False` only neighbours common to both endpoints are added.
    Returns (sorted destroy edges, affected vertices).
    """
    a, b = e
    inst = tour.instance
    na = inst.knn(a, m) if m > 0 else []
    nb = inst.knn(b, m) if m > 0 else []
    if union:
        affected = {a, b, *na, *nb}
    else:
        affected = {a, b} | (set(na) & set(nb))
    deleted = set()
    for v in affected:
        deleted.add(_key(v, tour.succ(v)))
        deleted.add(_key(tour.pred(v), v))
    deleted.add(_key(a, b))
    return sorted(deleted), affected


@dataclass
class Subproblem:
    """Compressed destroy subproblem.

    Local vertex i is global `vertices[i]`. `fixed_edges` join the two ends of
    each surviving segment; `segments[(u, v)]` is the global path from u to v
    (local ids, u < v in storage order of the fixed edge).
    """

    vertices: np.ndarray
    coords: np.ndarray
    fixed_edges: list[tuple[int, int]]
    segments: dict[tuple[int, int], np.ndarray]
    seed_length: float
    interior_excess: float

    @property
    def n(self) -> int:
        return len(self.vertices)

    def seed_order(self) -> np.ndarray:
        return np.arange(self.n, dtype=np.int64)


def compress_segments(tour: Tour, deleted: list[Edge]) -> Subproblem:
    """Cut the tour at `deleted` edges and shrink each remaining run to its ends.

    Conservation: tour length = seed_length + interior_excess, where
    seed_length measures the subproblem cycle with fixed edges at their
    endpoint distance.
    """
    n = tour.n
    order = tour.order
    pos = tour.position
    cuts = []
    for a, b in deleted:
        pa, pb = pos[a], pos[b]
        if (pa + 1) % n == pb:
            cuts.append(pa)
        elif (pb + 1) % n == pa:
            cuts.append(pb)
        else:
            raise ValueError(f"edge ({a}, {b}) is not in the tour")
    cuts = np.unique(np.array(cuts, dtype=np.int64))
    if len(cuts) == 0:
        raise ValueError("destroy set is empty")
    coords = tour.instance.coords
    verts: list[int] = []
    fixed: list[tuple[int, int]] = []
    segments: dict[tuple[int, int], np.ndarray] = {}
    excess = 0.0
    k = len(cuts)
    for j in range(k):
        lo = (cuts[j] + 1) % n
        hi = cuts[(j + 1) % k]  # run covers positions lo..hi
        if k == 1:
            run = np.roll(order, -lo)
        elif lo <= hi:
            run = order[lo:hi + 1]
        else:
            run = np.concatenate([order[lo:], order[:hi + 1]])
        if len(run) == 1:
            verts.append(int(run[0]))
            continue
        u = len(verts)
        verts.extend((int(run[0]), int(run[-1])))
        fixed.append((u, u + 1))
        segments[(u, u + 1)] = run.copy()
        if len(run) > 2:
            p = coords[run]
            interior = float(np.hypot(*np.diff(p, axis=0).T).sum())
            excess += interior - float(np.hypot(*(p[-1] - p[0])))
    vertices = np.array(verts, dtype=np.int64)
    sub_xy = coords[vertices]
    seed_len = float(np.hypot(*(sub_xy - np.roll(sub_xy, -1, axis=0)).T).sum()) if len(vertices) > 1 else 0.0
    return Subproblem(vertices, sub_xy, fixed, segments, seed_len, excess)


def expand(sub: Subproblem, cycle: np.ndarray) -> np.ndarray:
    """Global order from a subproblem cycle, restoring every segment."""
    pieces = []
    m = len(cycle)
    if m == 2:
        return sub.segments[(0, 1)].copy()
    i = 0
    # Start on an edge boundary so no segment is split across the wrap.
    for start in range(m):
        u, v = int(cycle[start - 1]), int(cycle[start])
        if (min(u, v), max(u, v)) not in sub.segments:
            break
    rolled = np.roll(cycle, -start)
    while i < m:
        u = int(rolled[i])
        v = int(rolled[(i + 1) % m])
        key = (min(u, v), max(u, v))
        seg = sub.segments.get(key)
        if seg is not None and i + 1 < m:
            pieces.append(seg if u == key[0] else seg[::-1])
            i += 2
        else:
            pieces.append(np.array([sub.vertices[u]], dtype=np.int64))
            i += 1
    return np.concatenate(pieces)


@dataclass
class RepairResult:
    order: np.ndarray
    length: float
    added: set[Edge]
    sub_before: float
    sub_after: float


def repair(sub: Subproblem, tour: Tour, seed=0, kicks: int = 0, budget: int | None = None) -> RepairResult:
    """Re-solve the subproblem from its pre-destroy configuration and expand it.

    The returned length is tracked incrementally (old length minus the
    subproblem's seed length plus its solved length).
    """
    if sub.n <= 3:
        cycle = sub.seed_order()
        after = sub.seed_length
    else:
        res = lk_solve(LkProblem(sub.coords, fixed_edges=sub.fixed_edges, start_tour=sub.seed_order()),
                       budget=budget, seed=seed, kicks=kicks)
        cycle = res.tour
        after = res.length
        if after > sub.seed_length:
            cycle, after = sub.seed_order(), sub.seed_length
    order = expand(sub, cycle)
    fixed = {(min(a, b), max(a, b)) for a, b in sub.fixed_edges}
    added = set()
    m = len(cycle)
    if m == 2:
        a, b = sub.vertices
        added.add(_key(a, b))
    else:
        for i in range(m):
            a, b = int(cycle[i]), int(cycle[(i + 1) % m])
            if (min(a, b), max(a, b)) not in fixed:
                added.add(_key(sub.vertices[a], sub.vertices[b]))
    return RepairResult(order, tour.length - sub.seed_length + after, added, sub.seed_length, after)


def survivor_factor(l_old: float, l_new: float) -> float:
    """Multiplier applied to the weight of an edge that survived a round."""
    return 1.0 - (math.exp((l_old - l_new) / l_old) - 1.0)


def update_stats(stats: EdgeStats, selected: Edge, deleted: list[Edge], added: set[Edge],
                 l_old: float, l_new: float, instance: Instance) -> None:
    """Apply the per-round update; afterwards the key set equals the new tour's edges."""
    deleted_set = set(deleted)
    survivors = deleted_set & added
    factor = survivor_factor(l_old, l_new)
    for e in deleted_set - survivors:
        stats.remove(e)
    # Unaffected edges age by one round.
    Q = stats.Q
    bumped = 0
    for e in Q:
        if e not in deleted_set:
            Q[e] += 1
            bumped += 1
    stats.sumQ += bumped
    for e in survivors:
        stats.W[e] = max(0.0, stats.W[e] * factor)
        stats.sumQ -= Q[e]
        Q[e] = 0
    if selected in survivors:
        stats.O[selected] = -math.inf
    for e in added - survivors:
        stats.add(e, instance.distance(*e))


@dataclass
class TnsConfig:
    m: int = 100
    alpha: float = 1000.0
    iteration_cap: int | None = None
    union: bool = True
    kicks: int = 20
    check_invariants: bool = False


@dataclass
class TnsResult:
    tour: Tour
    iterations: int
    stop_reason: str
    trace: list[tuple] = field(default_factory=list)
    peak_entries: int = 0
    max_entries: int = 0
    min_entries: int = 0
    max_subproblem: int = 0


class InvariantViolation(AssertionError):
    pass


def run_tns(instance: Instance, tour: Tour, worth_deletion=(), config: TnsConfig | None = None,
            seed=0, on_round: Callable[[tuple], None] | None = None) -> TnsResult:
    """Destroy-and-repair loop until 10 consecutive rounds change length by < 0.01%.

    Also stops when every edge score is -inf or after `iteration_cap` rounds
    (default 20 n). The input tour is not modified.
    """
    cfg = config or TnsConfig()
    tour = tour.copy()
    n = instance.n
    cap = cfg.iteration_cap if cfg.iteration_cap is not None else 20 * n
    rng = np.random.default_rng(seed)
    stats = EdgeStats.from_tour(tour, worth_deletion)
    window: deque[float] = deque(maxlen=STOP_WINDOW)
    trace = []
    sizes = [len(stats)]
    max_sub = 0
    stop = "iteration_cap"
    it = 0
    while it < cap:
        e = select_edge(stats, cfg.alpha)
        if e is None:
            stop = "exhausted"
            break
        it += 1
        deleted, _ = build_destroy_set(tour, e, cfg.m, cfg.union)
        if len(deleted) >= n:
            sub = compress_segments(tour, tour.edges())
            deleted = sorted(tour.edge_set())
        else:
            sub = compress_segments(tour, deleted)
        max_sub = max(max_sub, sub.n)
        l_old = tour.length
        rep = repair(sub, tour, seed=int(rng.integers(2**32)), kicks=cfg.kicks)
        previous = tour.order
        tour.set_order(rep.order)
        l_new = tour.length
        if l_new > l_old:
            # Equal-length rewiring that sums a few ulps longer: keep the old tour.
            tour.set_order(previous)
            l_new = tour.length
            rep = RepairResult(previous, l_new, set(deleted), rep.sub_before, rep.sub_before)
        update_stats(stats, e, deleted, rep.added, l_old, l_new, instance)
        sizes.append(len(stats))
        if cfg.check_invariants:
            _check(stats, tour, rep)
        rel = (l_old - l_new) / l_old
        rec = (it, e, l_old, l_new, rel)
        trace.append(rec)
        if on_round is not None:
            on_round(rec)
        window.append(rel)
        if len(window) == STOP_WINDOW and max(window) < STOP_TOLERANCE:
            stop = "converged"
            break
    return TnsResult(tour, it, stop, trace, stats.peak_entries, max(sizes), min(sizes), max_sub)


def _check(stats: EdgeStats, tour: Tour, rep: RepairResult) -> None:
    if not tour.is_valid():
        raise InvariantViolation("tour is not a permutation")
    if set(stats.keys()) != tour.edge_set():
        raise InvariantViolation("edge statistics keys differ from tour edges")
    if len(stats) != tour.n:
        raise InvariantViolation(f"{len(stats)} edge statistics entries for n={tour.n}")
    if abs(rep.length - tour.length) > 1e-6 * tour.length:
        raise InvariantViolation(f"tracked length {rep.length} != recomputed {tour.length}")
    if stats.sumQ != sum(stats.Q.values()):
        raise InvariantViolation("sumQ accumulator drifted")
