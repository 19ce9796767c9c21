"""Initial tours: hyper-tour guided chunking, nearest neighbour, random."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .heatmap import grid_partition
from .hypertour import Clustering, HyperTour
from .instance import Instance, Tour
from .lk import LkProblem, lk_path_solve, lk_solve


@dataclass
class InitResult:
    tour: Tour
    worth_deletion: set[tuple[int, int]]
    chunks: list[list[int]] | None = None


def chunk_supernodes(ring: list[int], sizes, l_s: int, start: int = 0) -> list[list[int]]:
    """Split the supernode ring into consecutive chunks sharing boundary supernodes.

    Walking from `start`, each chunk keeps absorbing the next supernode until
    its member count exceeds `l_s`; the last supernode of a chunk opens the
    next one. The walk ends when it would return to `start`.
    """
    if l_s < 2:
        raise ValueError("l_s must be >= 2")
    ring = list(ring)
    r = len(ring)
    if r == 0:
        return []
    i0 = ring.index(start) if start in ring else 0
    ring = ring[i0:] + ring[:i0]
    if r == 1:
        return [[ring[0]]]
    chunks = []
    i = 0
    while True:
        chunk = [ring[i]]
        count = sizes[ring[i]]
        j = i
        # Always take at least one more supernode, or the walk cannot advance.
        while j + 1 < r and (len(chunk) == 1 or count <= l_s):
            j += 1
            chunk.append(ring[j])
            count += sizes[ring[j]]
        chunks.append(chunk)
        if j + 1 >= r:
            return chunks
        i = j


def hilbert_index(coords: np.ndarray, order: int = 16) -> np.ndarray:
    """Position of each point along a Hilbert curve over its bounding box."""
    c = np.asarray(coords, dtype=np.float64)
    lo = c.min(axis=0)
    span = np.maximum(c.max(axis=0) - lo, 1e-300)
    side = 1 << order
    g = np.minimum(((c - lo) / span * (side - 1)).astype(np.int64), side - 1)
    x = g[:, 0].copy()
    y = g[:, 1].copy()
    d = np.zeros(len(c), dtype=np.int64)
    s = side >> 1
    while s > 0:
        rx = (x & s) > 0
        ry = (y & s) > 0
        d += s * s * ((3 * rx) ^ ry)
        # Rotate the quadrant.
        flip = ~ry
        swap_x = np.where(flip & rx, s - 1 - x, x)
        swap_y = np.where(flip & rx, s - 1 - y, y)
        x = np.where(flip, swap_y, swap_x)
        y = np.where(flip, swap_x, swap_y)
        s >>= 1
    return d


def worth_deletion_edges(tour: Tour, vertex_to_cluster) -> set[tuple[int, int]]:
    v2c = np.asarray(vertex_to_cluster)
    return {e for e in tour.edges() if v2c[e[0]] != v2c[e[1]]}


def _nearest_member(coords, members, target) -> int:
    pts = coords[members]
    d = np.hypot(pts[:, 0] - target[0], pts[:, 1] - target[1])
    return int(members[int(np.argmin(d))])


def initialize_tour(instance: Instance, ht: HyperTour, c: Clustering, l_s: int = 100,
                    seed=0, gamma: int = 30, kicks: int = 0) -> InitResult:
    """Build a tour by solving ring chunks as chained fixed-endpoint paths.

    Members of a supernode shared by two chunks belong to the earlier chunk;
    its exit vertex is the next chunk's entry. With a single cluster the
    ring is replaced by gamma-grid cells in Hilbert order.
    """
    coords = instance.coords
    n = instance.n
    rng = np.random.default_rng(seed)
    if len(c) == 1 and n > 3:
        cells = grid_partition(instance, gamma).cells
        cents = np.array([coords[cell].mean(axis=0) for cell in cells])
        groups = [np.array(cells[i], dtype=np.int64) for i in np.argsort(hilbert_index(cents), kind="stable")]
        centroids = np.array([coords[g].mean(axis=0) for g in groups])
        ring = list(range(len(groups)))
    else:
        groups = [np.array(cl, dtype=np.int64) for cl in c.clusters]
        centroids = c.supernode_coords
        ring = [int(v) for v in ht.order]
    sizes = [len(g) for g in groups]
    chunks = chunk_supernodes(ring, sizes, l_s, start=ring[0])

    if len(chunks) == 1:
        res = lk_solve(LkProblem(coords), seed=int(rng.integers(2**32)), kicks=kicks)
        tour = Tour(instance, res.tour)
        return InitResult(tour, worth_deletion_edges(tour, c.vertex_to_cluster), chunks)

    first_entry = _nearest_member(coords, groups[ring[0]], centroids[ring[0]])
    order: list[int] = []
    entry = first_entry
    last = len(chunks) - 1
    for ci, chunk in enumerate(chunks):
        if ci == 0:
            verts = np.concatenate([groups[s] for s in chunk])
            # Put the entry first for a stable local id.
            verts = np.concatenate([[entry], verts[verts != entry]])
        else:
            verts = np.concatenate([[entry]] + [groups[s] for s in chunk[1:]])
        if ci < last:
            nxt = chunks[ci + 1]
            target = centroids[nxt[1]] if len(nxt) > 1 else centroids[nxt[0]]
            exit_v = _nearest_member(coords, groups[chunk[-1]], target)
        else:
            exit_v = first_entry
            verts = np.concatenate([verts, [first_entry]])
        local_exit = int(np.flatnonzero(verts == exit_v)[-1])
        path = lk_path_solve(coords[verts], 0, local_exit, seed=int(rng.integers(2**32)),
                             kicks=kicks)
        glob = verts[path].tolist()
        if ci == 0:
            order.extend(glob)
        elif ci < last:
            order.extend(glob[1:])
        else:
            order.extend(glob[1:-1])
        entry = exit_v
    tour = Tour(instance, order)
    return InitResult(tour, worth_deletion_edges(tour, c.vertex_to_cluster), chunks)


def nearest_neighbor_tour(instance: Instance, start: int = 0) -> Tour:
    """Greedy nearest-neighbour construction using growing kd-tree queries."""
    n = instance.n
    coords = instance.coords
    tree = cKDTree(coords)
    visited = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int64)
    cur = start
    for i in range(n):
        order[i] = cur
        visited[cur] = True
        if i == n - 1:
            break
        k = 8
        while True:
            k = min(k, n)
            dist, idx = tree.query(coords[cur], k=k)
            idx = np.atleast_1d(idx)
            dist = np.atleast_1d(dist)
            free = ~visited[idx]
            if free.any():
                # Ties resolved by lower id among the closest free vertices.
                dmin = dist[free].min()
                cand = idx[free & (dist == dmin)]
                cur = int(cand.min())
                break
            if k == n:
                raise RuntimeError("no unvisited vertex left")
            k *= 4
    return Tour(instance, order)


def random_tour(instance: Instance, seed=0) -> Tour:
    return Tour(instance, np.random.default_rng(seed).permutation(instance.n))
