"""Sparse heatmap graph construction.

Pipeline: partition the plane into cells of at most ``gamma`` points, seed
one p-nearest-neighbour subgraph per cell, greedily add subgraphs until
every edge of the K_cov-nearest-neighbour graph is covered, score each
subgraph with a heatmap provider, average the scores per edge and keep the
top-k edges of every vertex.
"""

from __future__ import annotations

import heapq
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Hashable, Iterable, Mapping

import numpy as np

from .instance import Instance

Edge = tuple[int, int]


def _key(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


# --- grid partition -------------------------------------------------------------

@dataclass
class GridPartition:
    cells: list[list[int]]
    capacity: int

    def __len__(self) -> int:
        return len(self.cells)


def grid_partition(instance: Instance, gamma: int) -> GridPartition:
    """Recursive median bisection along the wider axis until cells hold <= gamma points."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    xy = instance.coords
    cells: list[list[int]] = []
    stack = [np.arange(instance.n)]
    while stack:
        ids = stack.pop()
        if len(ids) <= gamma:
            cells.append(sorted(ids.tolist()))
            continue
        pts = xy[ids]
        span = pts.max(axis=0) - pts.min(axis=0)
        axis = 0 if span[0] >= span[1] else 1
        order = np.lexsort((ids, pts[:, axis]))
        half = len(ids) // 2
        # Push the high half first so cells come out low-to-high.
        stack.append(ids[order[half:]])
        stack.append(ids[order[:half]])
    return GridPartition(cells, gamma)


# --- edge covering ------------------------------------------------------------------

@dataclass
class CandidateSet:
    """A center vertex and its p nearest neighbours (center included)."""

    center: int
    members: np.ndarray

    @property
    def edges(self) -> list[Edge]:
        m = sorted(int(v) for v in self.members)
        return [(m[i], m[j]) for i in range(len(m)) for j in range(i + 1, len(m))]

    def __len__(self) -> int:
        return len(self.members)


def candidate_set(instance: Instance, center: int, p: int) -> CandidateSet:
    members = [center] + instance.knn(center, p - 1)
    return CandidateSet(center, np.array(members, dtype=np.int64))


def knn_universe(instance: Instance, k_cov: int) -> list[set[int]]:
    """Adjacency of the symmetric k_cov-nearest-neighbour graph."""
    adj: list[set[int]] = [set() for _ in range(instance.n)]
    if instance.n < 2:
        return adj
    table = instance.index.knn_all(k_cov)
    for u in range(instance.n):
        for w in table[u]:
            w = int(w)
            adj[u].add(w)
            adj[w].add(u)
    return adj


def greedy_set_cover(keys: Iterable[Hashable], gain: Callable[[Hashable], int],
                     commit: Callable[[Hashable], None]) -> list:
    """Lazy greedy cover: repeatedly take the key with the most uncovered elements.

    `gain(key)` must be non-increasing as other keys are committed (true for
    coverage counts), which makes lazy re-evaluation exact. Ties go to the
    smaller key.
    """
    heap = [(-gain(k), k) for k in keys]
    heap = [h for h in heap if h[0] < 0]
    heapq.heapify(heap)
    chosen = []
    while heap:
        _, k = heapq.heappop(heap)
        g = gain(k)
        if g <= 0:
            continue
        if heap and (-g, k) > heap[0]:
            heapq.heappush(heap, (-g, k))
            continue
        commit(k)
        chosen.append(k)
    return chosen


def greedy_cover_sets(sets: Mapping[Hashable, Iterable[Hashable]],
                      universe: Iterable[Hashable]) -> list:
    """Greedy set cover over explicit sets; returns the chosen keys in order."""
    uncovered = set(universe)
    members = {k: set(v) for k, v in sets.items()}
    return greedy_set_cover(
        sorted(members),
        gain=lambda k: len(members[k] & uncovered),
        commit=lambda k: uncovered.difference_update(members[k]),
    )


@dataclass
class CoverResult:
    sets: list[CandidateSet]
    seeded: int
    universe_edges: int
    uncovered: int


def cover_edges(instance: Instance, p: int = 100, gamma: int = 30, seed=0,
                k_cov: int = 10) -> CoverResult:
    """Choose candidate sets so every k_cov-NN edge lies inside one of them.

    Grid cells seed one set each (random vertex per cell); greedy set cover
    then repairs whatever is still uncovered.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    n = instance.n
    rng = np.random.default_rng(seed)
    if n <= p:
        cs = CandidateSet(0, np.arange(n, dtype=np.int64))
        return CoverResult([cs], 1, _count_edges(knn_universe(instance, min(k_cov, p - 1))), 0)

    # A set of size p only guarantees to hold its center's p-1 neighbours.
    adj = knn_universe(instance, min(k_cov, p - 1))
    total = _count_edges(adj)
    uncovered_adj = [set(s) for s in adj]
    state = {"left": total}

    def covered_by(cs: CandidateSet) -> list[Edge]:
        mset = set(cs.members.tolist())
        out = []
        for u in cs.members.tolist():
            for w in uncovered_adj[u]:
                if u < w and w in mset:
                    out.append((u, w))
        return out

    def mark(cs: CandidateSet) -> None:
        for u, w in covered_by(cs):
            uncovered_adj[u].discard(w)
            uncovered_adj[w].discard(u)
            state["left"] -= 1

    chosen: list[CandidateSet] = []
    for cell in grid_partition(instance, gamma).cells:
        v = int(cell[rng.integers(len(cell))])
        cs = candidate_set(instance, v, p)
        mark(cs)
        chosen.append(cs)
    seeded = len(chosen)

    centers = [v for v in range(n) if uncovered_adj[v]]

    def commit(v: int) -> None:
        cs = candidate_set(instance, v, p)
        mark(cs)
        chosen.append(cs)

    greedy_set_cover(centers, gain=lambda v: len(covered_by(candidate_set(instance, v, p))),
                     commit=commit)
    return CoverResult(chosen, seeded, total, state["left"])


def _count_edges(adj: list[set[int]]) -> int:
    return sum(len(s) for s in adj) // 2


# --- providers --------------------------------------------------------------------

class HeatmapProvider(ABC):
    """Scores every edge of a candidate subgraph with a value in [0, 1]."""

    @abstractmethod
    def score(self, subgraph: CandidateSet, instance: Instance) -> dict[Edge, float]:
        ...


def distance_heat(subgraph: CandidateSet, instance: Instance, tau: float = 1.0) -> dict[Edge, float]:
    """heat(i, j) = exp(-d_ij / (tau * mean nearest-neighbour distance in the subgraph))."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    ids = np.sort(np.asarray(subgraph.members, dtype=np.int64))
    m = len(ids)
    if m < 2:
        return {}
    pts = instance.coords[ids]
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    masked = d + np.diag(np.full(m, np.inf))
    dbar = float(masked.min(axis=1).mean())
    if dbar <= 0.0:
        heat = np.where(d == 0.0, 1.0, 0.0)
    else:
        heat = np.clip(np.exp(-d / (tau * dbar)), 0.0, 1.0)
    iu, ju = np.triu_indices(m, 1)
    a = ids[iu].tolist()
    b = ids[ju].tolist()
    return dict(zip(zip(a, b), heat[iu, ju].tolist()))


@dataclass
class DistanceHeatProvider(HeatmapProvider):
    tau: float = 1.0

    def score(self, subgraph, instance):
        return distance_heat(subgraph, instance, self.tau)


# --- merge ------------------------------------------------------------------------

@dataclass
class SparseHeatmapGraph:
    """Per-vertex top-k candidate edges.

    `selected[v]` holds at most k (neighbour, heat) pairs chosen by v; the
    undirected graph is the union of all selections.
    """

    n: int
    k: int
    selected: list[list[tuple[int, float]]]
    instance: Instance | None = None
    stats: dict = field(default_factory=dict)

    def edges(self) -> dict[Edge, float]:
        out: dict[Edge, float] = {}
        for v, row in enumerate(self.selected):
            for u, h in row:
                out[_key(v, u)] = h
        return out

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for a, b in self.edges():
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def num_edges(self) -> int:
        return len(self.edges())


def topk_graph(heat: Mapping[Edge, float], n: int, k: int,
               instance: Instance | None = None) -> SparseHeatmapGraph:
    """Keep each vertex's k highest-heat incident edges (ties: lower neighbour id)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    incident: list[list[tuple[float, int]]] = [[] for _ in range(n)]
    for (a, b), h in heat.items():
        incident[a].append((-h, b))
        incident[b].append((-h, a))
    selected = []
    for v in range(n):
        best = heapq.nsmallest(k, incident[v])
        selected.append([(u, -nh) for nh, u in best])
    return SparseHeatmapGraph(n, k, selected, instance)


def merge_topk(subheatmaps: Iterable[Mapping[Edge, float]], instance: Instance,
               k: int = 2) -> SparseHeatmapGraph:
    """Average each edge over the sub-heatmaps containing it, then take per-vertex top-k."""
    sums: dict[Edge, float] = {}
    counts: dict[Edge, int] = {}
    for sub in subheatmaps:
        for (a, b), h in sub.items():
            e = _key(a, b)
            sums[e] = sums.get(e, 0.0) + h
            counts[e] = counts.get(e, 0) + 1
    mean = {e: s / counts[e] for e, s in sums.items()}
    return topk_graph(mean, instance.n, k, instance)


def build_heatmap_graph(instance: Instance, p: int = 100, gamma: int = 30, k: int = 2,
                        k_cov: int = 10, provider: HeatmapProvider | None = None,
                        seed=0, noise: float = 0.0, noise_seed=None) -> SparseHeatmapGraph:
    """Full heatmap stage: cover, score, merge, top-k.

    Sub-heatmaps are folded into running sums one at a time and only
    edges of the coverage universe are kept, so live storage stays at
    O(k_cov * n + p^2) entries. `noise` adds i.i.d. U(-noise, noise) to every
    merged heat (clipped to [0, 1]) before top-k selection.
    """
    provider = provider or DistanceHeatProvider()
    cover = cover_edges(instance, p, gamma, seed, k_cov)
    universe = knn_universe(instance, min(k_cov, max(p - 1, 1)))
    sums: dict[Edge, float] = {}
    counts: dict[Edge, int] = {}
    peak = 0
    for cs in cover.sets:
        sub = provider.score(cs, instance)
        peak = max(peak, len(sums) + len(sub))
        for (a, b), h in sub.items():
            if b not in universe[a]:
                continue
            e = _key(a, b)
            sums[e] = sums.get(e, 0.0) + h
            counts[e] = counts.get(e, 0) + 1
        del sub
    mean = {e: sums[e] / counts[e] for e in sorted(sums)}
    if noise > 0.0:
        rng = np.random.default_rng(noise_seed if noise_seed is not None else seed)
        eps = rng.uniform(-noise, noise, size=len(mean))
        mean = {e: min(1.0, max(0.0, h + x)) for (e, h), x in zip(mean.items(), eps)}
    g = topk_graph(mean, instance.n, k, instance)
    g.stats = {
        "candidate_sets": len(cover.sets),
        "seeded_sets": cover.seeded,
        "universe_edges": cover.universe_edges,
        "uncovered": cover.uncovered,
        "peak_live_entries": peak,
        "merged_edges": len(mean),
    }
    return g


# --- file ingestion ---------------------------------------------------------------

class HeatmapFileError(ValueError):
    pass


def load_heatmap_file(path, instance: Instance, k: int = 2) -> SparseHeatmapGraph:
    """Read ``i j heat`` triplets (0-based), average duplicates, keep top-k per vertex."""
    sums: dict[Edge, float] = {}
    counts: dict[Edge, int] = {}
    n = instance.n
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise HeatmapFileError(f"line {lineno}: expected 'i j heat', got {line!r}")
        try:
            i, j, h = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise HeatmapFileError(f"line {lineno}: cannot parse {line!r}") from exc
        if not (0 <= i < n and 0 <= j < n):
            raise HeatmapFileError(f"line {lineno}: vertex id out of range 0..{n - 1}")
        if i == j:
            raise HeatmapFileError(f"line {lineno}: self-loop ({i}, {j})")
        if not 0.0 <= h <= 1.0:
            raise HeatmapFileError(f"line {lineno}: heat {h} outside [0, 1]")
        e = _key(i, j)
        sums[e] = sums.get(e, 0.0) + h
        counts[e] = counts.get(e, 0) + 1
    if not sums:
        raise HeatmapFileError(f"{path}: no candidate edges")
    mean = {e: sums[e] / counts[e] for e in sorted(sums)}
    return topk_graph(mean, n, k, instance)


def write_heatmap_file(graph: SparseHeatmapGraph, path) -> None:
    lines = [f"{a} {b} {float(h)!r}" for (a, b), h in sorted(graph.edges().items())]
    Path(path).write_text("\n".join(lines) + "\n")
