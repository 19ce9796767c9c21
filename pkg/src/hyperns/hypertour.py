"""Bridge-deletion clustering and the tour over cluster centroids."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .heatmap import SparseHeatmapGraph
from .instance import Instance
from .lk import LkProblem, lk_solve, nearest_neighbor_order

RECURSION_THRESHOLD = 5000


def find_bridges(adj: Sequence[Iterable]) -> list[tuple[int, int]]:
    """Bridges of a simple undirected graph via iterative low-link DFS.

    `adj[v]` lists the neighbours of v. Returns (min, max) pairs, sorted.
    """
    n = len(adj)
    nbrs = [sorted(a) for a in adj]
    disc = [-1] * n
    low = [0] * n
    bridges = []
    timer = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = timer
        timer += 1
        # Frame: (vertex, parent, next neighbour index).
        stack = [(root, -1, 0)]
        while stack:
            v, parent, i = stack[-1]
            if i < len(nbrs[v]):
                stack[-1] = (v, parent, i + 1)
                w = nbrs[v][i]
                if w == parent:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, v, 0))
                else:
                    low[v] = min(low[v], disc[w])
            else:
                stack.pop()
                if parent >= 0:
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        bridges.append((min(v, parent), max(v, parent)))
    return sorted(bridges)


def connected_components(adj: Sequence[Iterable]) -> list[list[int]]:
    """Components as sorted vertex lists, ordered by smallest vertex."""
    n = len(adj)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        q = deque([s])
        while q:
            v = q.popleft()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    q.append(w)
        comps.append(sorted(comp))
    return comps


@dataclass
class Clustering:
    clusters: list[list[int]]
    supernode_coords: np.ndarray
    vertex_to_cluster: np.ndarray
    iterations: int = 0
    graph: list[set[int]] | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.clusters)

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.clusters]


def _make_clustering(comps, coords, iterations=0, graph=None) -> Clustering:
    n = len(coords)
    v2c = np.empty(n, dtype=np.int64)
    cents = np.empty((len(comps), 2))
    for ci, comp in enumerate(comps):
        v2c[comp] = ci
        cents[ci] = coords[comp].mean(axis=0)
    return Clustering(comps, cents, v2c, iterations, graph)


def cluster_by_bridge_deletion(g: SparseHeatmapGraph | Sequence[Iterable],
                               coords: np.ndarray | None = None) -> Clustering:
    """Delete bridges inside every component until the component count settles.

    Accepts a heatmap graph (coordinates taken from its instance) or a plain
    adjacency list plus `coords`.
    """
    if isinstance(g, SparseHeatmapGraph):
        adj = g.adjacency()
        if coords is None:
            coords = g.instance.coords
    else:
        adj = [set(a) for a in g]
    if coords is None:
        raise ValueError("coordinates are required to place supernodes")
    if not adj:
        raise ValueError("empty graph")
    coords = np.asarray(coords, dtype=np.float64)
    count = None
    iterations = 0
    while True:
        comps = connected_components(adj)
        if count is not None and len(comps) == count:
            break
        count = len(comps)
        iterations += 1
        for comp in comps:
            if len(comp) < 2:
                continue
            local = {v: i for i, v in enumerate(comp)}
            sub = [[local[w] for w in adj[v]] for v in comp]
            for a, b in find_bridges(sub):
                u, w = comp[a], comp[b]
                adj[u].discard(w)
                adj[w].discard(u)
    return _make_clustering(comps, coords, iterations, adj)


def build_reduced_instance(c: Clustering, name: str = "reduced") -> Instance:
    return Instance(c.supernode_coords, name=name, allow_duplicates=True)


@dataclass
class HyperTour:
    order: np.ndarray
    length: float = 0.0

    def __len__(self) -> int:
        return len(self.order)


def solve_hyper_tour(reduced: Instance, seed=0, kicks: int = 0,
                     recursion_threshold: int = RECURSION_THRESHOLD,
                     config=None) -> HyperTour:
    """Tour over supernodes: nearest-neighbour start improved by LK.

    Above `recursion_threshold` supernodes the full pipeline is applied to
    the reduced instance instead.
    """
    n = reduced.n
    if n <= 3:
        order = np.arange(n, dtype=np.int64)
        return HyperTour(order, _cycle_len(reduced.coords, order))
    if n > recursion_threshold:
        from .pipeline import Config, solve  # deferred: pipeline imports this module

        cfg = config or Config()
        tour, _ = solve(reduced, cfg.replace(seed=seed))
        return HyperTour(tour.order.copy(), tour.length)
    start = nearest_neighbor_order(reduced.coords)
    res = lk_solve(LkProblem(reduced.coords, start_tour=start), seed=seed, kicks=kicks)
    return HyperTour(res.tour, res.length)


def _cycle_len(coords, order) -> float:
    if len(order) < 2:
        return 0.0
    p = coords[order]
    return float(np.hypot(*(p - np.roll(p, -1, axis=0)).T).sum())


def hyper_tour(g: SparseHeatmapGraph, seed=0, kicks: int = 0, config=None):
    """Cluster, reduce and solve; returns (Clustering, HyperTour)."""
    clustering = cluster_by_bridge_deletion(g)
    reduced = build_reduced_instance(clustering)
    return clustering, solve_hyper_tour(reduced, seed=seed, kicks=kicks, config=config)


def write_hypertour_dump(path, clustering: Clustering, ht: HyperTour) -> None:
    """Cluster id per vertex, then the supernode order."""
    lines = ["# vertex cluster"]
    lines += [f"{v} {int(c)}" for v, c in enumerate(clustering.vertex_to_cluster)]
    lines.append("# hyper tour")
    lines.append(" ".join(str(int(c)) for c in ht.order))
    Path(path).write_text("\n".join(lines) + "\n")
