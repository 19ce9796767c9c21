"""Lin-Kernighan local search with fixed-edge support.

The search engine is a variable-depth sequential 2-opt (LK-style) move
augmented with Or-opt segment moves, restricted to nearest-neighbour
candidate lists and driven by don't-look bits. Fixed edges are never
removed, which lets the same engine solve

* plain cycles,
* compressed destroy-and-repair subproblems (segments frozen as edges),
* fixed-endpoint paths, by closing the path with a virtual fixed edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy.spatial import cKDTree

from . import _kernel

DEPTH_MAX = 5
CANDIDATES = 8
BREADTH = (5, 3, 1, 1, 1)
OR_OPT_MAX_SEGMENT = 3
HELD_KARP_LIMIT = 15


class InfeasibleFixedEdges(ValueError):
    """Fixed edges that cannot all lie on one Hamiltonian cycle."""


@dataclass
class LkProblem:
    """A local TSP over `coords` (local ids 0..N-1).

    Attributes:
        coords: (N, 2) coordinates.
        fixed_edges: pairs that must stay in the tour.
        start_tour: optional initial cycle; must contain every fixed edge.
        global_ids: optional map local id -> caller id, carried through.
        candidates: neighbour list size per vertex.
    """

    coords: np.ndarray
    fixed_edges: list[tuple[int, int]] = field(default_factory=list)
    start_tour: np.ndarray | None = None
    global_ids: np.ndarray | None = None
    candidates: int = CANDIDATES

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)

    @property
    def n(self) -> int:
        return len(self.coords)


@dataclass
class LkResult:
    tour: np.ndarray
    length: float
    moves_applied: int


def fixed_table(n: int, fixed_edges) -> np.ndarray:
    """(n, 2) partner table; raises if fixed edges are not disjoint paths."""
    table = np.full((n, 2), -1, dtype=np.int64)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    seen = set()
    for a, b in fixed_edges:
        a, b = int(a), int(b)
        if a == b:
            raise InfeasibleFixedEdges(f"self-loop fixed edge ({a}, {b})")
        key = (min(a, b), max(a, b))
        if key in seen:
            continue
        seen.add(key)
        for v, w in ((a, b), (b, a)):
            if table[v, 0] < 0:
                table[v, 0] = w
            elif table[v, 1] < 0:
                table[v, 1] = w
            else:
                raise InfeasibleFixedEdges(f"vertex {v} has more than two fixed edges")
        ra, rb = find(a), find(b)
        if ra == rb:
            raise InfeasibleFixedEdges("fixed edges contain a cycle")
        parent[ra] = rb
    return table


def candidate_lists(coords: np.ndarray, size: int = CANDIDATES) -> np.ndarray:
    n = len(coords)
    k = min(size, n - 1)
    if k <= 0:
        return np.full((n, 1), -1, dtype=np.int64)
    _, idx = cKDTree(coords).query(coords, k=k + 1)
    idx = np.asarray(idx, dtype=np.int64).reshape(n, k + 1)
    out = np.empty((n, k), dtype=np.int64)
    for v in range(n):
        row = idx[v][idx[v] != v][:k]
        if len(row) < k:
            row = np.concatenate([row, np.full(k - len(row), -1, dtype=np.int64)])
        out[v] = row
    return out


def nearest_neighbor_order(coords: np.ndarray, fixed=None, start: int = 0) -> np.ndarray:
    """Nearest-neighbour construction that walks fixed paths as units."""
    n = len(coords)
    if fixed is None:
        fixed = np.full((n, 2), -1, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int64)
    k = 0
    cur = start
    # Start from a fixed-path end so the path can be walked in one go.
    prev = -1
    while fixed[cur, 0] >= 0 and fixed[cur, 1] >= 0:
        nxt = fixed[cur, 0] if fixed[cur, 0] != prev else fixed[cur, 1]
        prev, cur = cur, int(nxt)
    while True:
        # Walk the fixed path starting at cur.
        prev = -1
        v = cur
        while True:
            order[k] = v
            k += 1
            visited[v] = True
            nxt = -1
            for w in fixed[v]:
                if w >= 0 and not visited[w] and w != prev:
                    nxt = w
                    break
            if nxt < 0:
                break
            prev, v = v, nxt
        if k == n:
            return order
        d = np.hypot(*(coords - coords[v]).T)
        d[visited] = np.inf
        # Only path ends (or free vertices) are valid entry points.
        interior = (fixed[:, 0] >= 0) & (fixed[:, 1] >= 0)
        d[interior] = np.inf
        cur = int(np.argmin(d))


def cycle_length(coords: np.ndarray, order: np.ndarray) -> float:
    return float(_kernel.tour_cost(np.array(coords, dtype=np.float64, order="C"),
                                   np.asarray(order, dtype=np.int64)))


def _random_cuts(n: int, rng: np.random.Generator, window: int) -> np.ndarray:
    w = min(window, n)
    off = int(rng.integers(n))
    rel = np.sort(rng.choice(w - 1, size=3, replace=False))
    cuts = np.sort((rel + off) % n)
    return cuts.astype(np.int64)


def lk_solve(problem: LkProblem, budget: int | None = None, seed=0,
             kicks: int = 0, kick_window: int = 50) -> LkResult:
    """Improve a cycle with LK moves, never removing fixed edges.

    Args:
        problem: the instance, fixed edges and optional start tour.
        budget: maximum number of improving moves per LK descent;
            defaults to 50 * N.
        seed: RNG seed, used only by `kicks`.
        kicks: number of segment-swap perturbations tried after the first
            descent; each is kept only if the re-optimized tour is shorter.
        kick_window: perturbations cut edges within this many positions.

    Returns:
        LkResult over local ids; the length includes fixed edges at their
        Euclidean length and is never above the start tour's.
    """
    n = problem.n
    xy = np.array(problem.coords, dtype=np.float64, order="C")
    fixed = fixed_table(n, problem.fixed_edges)
    if problem.start_tour is not None:
        order = np.array(problem.start_tour, dtype=np.int64)
        if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
            raise ValueError("start_tour is not a permutation of the problem vertices")
        pos = np.empty(n, dtype=np.int64)
        pos[order] = np.arange(n)
        for a, b in problem.fixed_edges:
            if (pos[a] - pos[b]) % n not in (1, n - 1):
                raise InfeasibleFixedEdges(f"start tour misses fixed edge ({a}, {b})")
    else:
        order = nearest_neighbor_order(xy, fixed)
    if n <= 3:
        return LkResult(order, cycle_length(xy, order), 0)
    if budget is None:
        budget = 50 * n
    cand = candidate_lists(xy, problem.candidates)
    breadth = np.array(BREADTH[:DEPTH_MAX], dtype=np.int64)
    active = np.ones(n, dtype=np.bool_)
    moves = int(_kernel.lk_optimize(xy, order, fixed, cand, active, breadth,
                                    OR_OPT_MAX_SEGMENT, budget))
    best_len = cycle_length(xy, order)
    if kicks > 0 and n >= 8:
        rng = np.random.default_rng(seed)
        for _ in range(kicks):
            cuts = _random_cuts(n, rng, kick_window)
            trial = _kernel.double_bridge(order, fixed, cuts)
            active[:] = False
            for c in cuts:
                active[order[c]] = True
                active[order[(c + 1) % n]] = True
            m = int(_kernel.lk_optimize(xy, trial, fixed, cand, active, breadth,
                                        OR_OPT_MAX_SEGMENT, budget))
            trial_len = cycle_length(xy, trial)
            if trial_len < best_len - _kernel.EPS:
                order, best_len = trial, trial_len
                moves += m
    return LkResult(order, best_len, moves)


def lk_path_solve(coords, entry: int, exit: int, budget: int | None = None, seed=0,
                  start_path=None, kicks: int = 0) -> np.ndarray:
    """Shortest Hamiltonian path found from `entry` to `exit`.

    The path is closed with a virtual fixed edge (exit, entry) and solved
    as a cycle; the virtual edge is dropped from the result.
    """
    coords = np.asarray(coords, dtype=np.float64)
    n = len(coords)
    if entry == exit:
        raise ValueError("entry and exit must differ")
    if n == 2:
        return np.array([entry, exit], dtype=np.int64)
    start = None
    if start_path is not None:
        start = np.asarray(start_path, dtype=np.int64)
        if start[0] != entry or start[-1] != exit:
            raise ValueError("start_path must run from entry to exit")
    res = lk_solve(LkProblem(coords, fixed_edges=[(exit, entry)], start_tour=start),
                   budget=budget, seed=seed, kicks=kicks)
    return orient_path(res.tour, entry, exit)


def orient_path(cycle: np.ndarray, entry: int, exit: int) -> np.ndarray:
    """Cut a cycle containing edge (exit, entry) into the entry..exit path."""
    n = len(cycle)
    i = int(np.flatnonzero(cycle == entry)[0])
    rolled = np.roll(cycle, -i)
    if rolled[-1] == exit:
        return rolled
    # exit follows entry: walk backwards.
    rev = np.roll(rolled[::-1], 1)
    assert rev[0] == entry and rev[-1] == exit, "cycle lacks the virtual edge"
    return rev


def path_length(coords: np.ndarray, path) -> float:
    p = np.asarray(coords)[np.asarray(path, dtype=np.int64)]
    return float(np.hypot(*np.diff(p, axis=0).T).sum())


# --- exact oracles ------------------------------------------------------------

def _dist_matrix(coords) -> np.ndarray:
    c = np.asarray(coords, dtype=np.float64)
    return np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])


def held_karp_exact(coords) -> tuple[list[int], float]:
    """Optimal tour by bitmask dynamic programming (N <= 15)."""
    c = np.asarray(coords, dtype=np.float64)
    n = len(c)
    if n > HELD_KARP_LIMIT:
        raise ValueError(f"held_karp_exact supports at most {HELD_KARP_LIMIT} points, got {n}")
    if n <= 3:
        order = list(range(n))
        return order, cycle_length(c, np.array(order)) if n > 1 else 0.0
    d = _dist_matrix(c)
    m = n - 1  # vertex 0 is the fixed start; bit i encodes vertex i+1
    size = 1 << m
    dp = np.full((size, m), np.inf)
    parent = np.full((size, m), -1, dtype=np.int64)
    for j in range(m):
        dp[1 << j, j] = d[0, j + 1]
    inner = d[1:, 1:]
    bits = 1 << np.arange(m)
    for mask in range(1, size):
        row = dp[mask]
        if not np.isfinite(row).any():
            continue
        # via[k, j]: reach j last through k last.
        via = row[:, None] + inner
        k = np.argmin(via, axis=0)
        val = via[k, np.arange(m)]
        for j in np.flatnonzero((mask & bits) == 0):
            nm = mask | (1 << j)
            if val[j] < dp[nm, j]:
                dp[nm, j] = val[j]
                parent[nm, j] = k[j]
    full = size - 1
    total = dp[full] + d[1:, 0]
    j = int(np.argmin(total))
    best = float(total[j])
    order = []
    mask = full
    while j >= 0:
        order.append(j + 1)
        pj = parent[mask, j]
        mask ^= 1 << j
        j = int(pj)
    order.append(0)
    return order[::-1], best


def held_karp_path(coords, entry: int, exit: int) -> tuple[list[int], float]:
    """Optimal Hamiltonian path entry -> exit by bitmask DP."""
    c = np.asarray(coords, dtype=np.float64)
    n = len(c)
    if n > HELD_KARP_LIMIT:
        raise ValueError(f"held_karp_path supports at most {HELD_KARP_LIMIT} points, got {n}")
    if n == 2:
        return [entry, exit], path_length(c, [entry, exit])
    d = _dist_matrix(c)
    inner = [v for v in range(n) if v not in (entry, exit)]
    m = len(inner)
    size = 1 << m
    dp = np.full((size, m), np.inf)
    parent = np.full((size, m), -1, dtype=np.int64)
    for j, v in enumerate(inner):
        dp[1 << j, j] = d[entry, v]
    for mask in range(1, size):
        for j in range(m):
            if not mask & (1 << j) or not np.isfinite(dp[mask, j]):
                continue
            for k in range(m):
                if mask & (1 << k):
                    continue
                nm = mask | (1 << k)
                val = dp[mask, j] + d[inner[j], inner[k]]
                if val < dp[nm, k]:
                    dp[nm, k] = val
                    parent[nm, k] = j
    full = size - 1
    total = dp[full] + np.array([d[v, exit] for v in inner])
    j = int(np.argmin(total))
    best = float(total[j])
    seq = []
    mask = full
    while j >= 0:
        seq.append(inner[j])
        pj = parent[mask, j]
        mask ^= 1 << j
        j = int(pj)
    return [entry] + seq[::-1] + [exit], best


def brute_force_tour(coords) -> tuple[list[int], float]:
    """Exhaustive enumeration with vertex 0 fixed first (N <= 9)."""
    c = np.asarray(coords, dtype=np.float64)
    n = len(c)
    best, best_order = np.inf, None
    for perm in permutations(range(1, n)):
        if n > 2 and perm[0] > perm[-1]:
            continue
        order = np.array((0,) + perm)
        length = cycle_length(c, order)
        if length < best:
            best, best_order = length, list(order)
    return best_order, best
