"""Instance geometry, k-NN queries, tours and TSPLIB I/O."""

from __future__ import annotations

import math
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree


class TsplibError(ValueError):
    """Raised for malformed or unsupported TSPLIB files."""


class SpatialIndex:
    """k-nearest-neighbour queries over a fixed point set.

    Backed by a kd-tree. Results are sorted by distance with ties broken by
    the lower vertex id, so they are reproducible across platforms.
    """

    def __init__(self, coords: np.ndarray):
        self._coords = coords
        self._tree = cKDTree(coords)
        self.n = len(coords)

    def knn(self, v: int, m: int) -> list[int]:
        m = min(m, self.n - 1)
        if m <= 0:
            return []
        # Over-query, then widen until the boundary distance is strictly
        # inside the fetched set so tied vertices are not dropped.
        k = min(m + 2, self.n)
        while True:
            dist, idx = self._tree.query(self._coords[v], k=k)
            dist = np.atleast_1d(dist)
            idx = np.atleast_1d(idx)
            if k >= self.n or dist[-1] > dist[m]:
                break
            k = min(2 * k, self.n)
        mask = idx != v
        idx = idx[mask]
        # Exact distances for the tie-break; the tree returns them already,
        # but recomputing keeps the ordering identical to brute force.
        d = np.hypot(*(self._coords[idx] - self._coords[v]).T)
        order = np.lexsort((idx, d))
        return [int(i) for i in idx[order[:m]]]

    def knn_all(self, m: int) -> np.ndarray:
        """Neighbour table of shape (n, min(m, n-1)), same ordering as `knn`."""
        m = min(m, self.n - 1)
        out = np.empty((self.n, max(m, 0)), dtype=np.int64)
        if m <= 0:
            return out
        k = min(m + 2, self.n)
        dist, idx = self._tree.query(self._coords, k=k)
        for v in range(self.n):
            if k < self.n and dist[v, -1] <= dist[v, m]:
                out[v] = self.knn(v, m)
                continue
            row = idx[v][idx[v] != v]
            d = np.hypot(*(self._coords[row] - self._coords[v]).T)
            out[v] = row[np.lexsort((row, d))[:m]]
        return out


class Instance:
    """An immutable set of distinct 2-D points.

    Args:
        coords: array-like of shape (n, 2).
        name: identifier carried into reports and output files.
        allow_duplicates: accept coincident points. Off by default;
            reduced instances over cluster centroids switch it on.
        tsplib_rounding: round distances to the nearest integer when
            computing tour lengths (TSPLIB ``nint`` convention).
    """

    def __init__(
        self,
        coords,
        name: str = "instance",
        allow_duplicates: bool = False,
        tsplib_rounding: bool = False,
    ):
        arr = np.array(coords, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"coords must have shape (n, 2), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coordinates must be finite")
        if not allow_duplicates and len(arr) > 1:
            if len(np.unique(arr, axis=0)) != len(arr):
                raise ValueError("instance contains duplicate points")
        arr.setflags(write=False)
        self.coords = arr
        self.name = name
        self.tsplib_rounding = tsplib_rounding

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def points(self) -> list[tuple[float, float]]:
        return [(float(x), float(y)) for x, y in self.coords]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Instance(name={self.name!r}, n={self.n})"

    @cached_property
    def index(self) -> SpatialIndex:
        return SpatialIndex(self.coords)

    def distance(self, a: int, b: int) -> float:
        (xa, ya), (xb, yb) = self.coords[a], self.coords[b]
        d = math.hypot(xa - xb, ya - yb)
        if self.tsplib_rounding:
            return float(math.floor(d + 0.5))
        return d

    def knn(self, v: int, m: int) -> list[int]:
        return self.index.knn(v, m)

    def subset(self, ids: Sequence[int], name: str | None = None) -> "Instance":
        return Instance(
            self.coords[np.asarray(ids, dtype=np.int64)],
            name=name or f"{self.name}-sub",
            allow_duplicates=True,
        )


def path_lengths(coords: np.ndarray, order: np.ndarray, rounding: bool = False) -> np.ndarray:
    """Lengths of edges order[i] -> order[i+1], including the closing edge."""
    pts = coords[order]
    nxt = np.roll(pts, -1, axis=0)
    d = np.hypot(pts[:, 0] - nxt[:, 0], pts[:, 1] - nxt[:, 1])
    if rounding:
        d = np.floor(d + 0.5)
    return d


class Tour:
    """A Hamiltonian cycle stored as order plus inverse permutation.

    The cached `length` is kept in sync by `set_order`; code that edits
    `order` in place must call `refresh` afterwards.
    """

    def __init__(self, instance: Instance, order: Iterable[int]):
        self.instance = instance
        self.set_order(np.asarray(list(order) if not isinstance(order, np.ndarray) else order,
                                  dtype=np.int64))

    def set_order(self, order: np.ndarray) -> None:
        order = np.array(order, dtype=np.int64)
        n = self.instance.n
        if order.shape != (n,):
            raise ValueError(f"tour has {order.size} entries, instance has {n}")
        position = np.full(n, -1, dtype=np.int64)
        position[order] = np.arange(n)
        if np.any(position < 0):
            raise ValueError("order is not a permutation")
        self.order = order
        self.position = position
        self.length = tour_length(self)

    def refresh(self) -> None:
        self.set_order(self.order)

    @property
    def n(self) -> int:
        return len(self.order)

    def succ(self, v: int) -> int:
        return int(self.order[(self.position[v] + 1) % self.n])

    def pred(self, v: int) -> int:
        return int(self.order[self.position[v] - 1])

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as (min, max) pairs in tour order."""
        a = self.order
        b = np.roll(a, -1)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        return list(zip(lo.tolist(), hi.tolist()))

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edges())

    def copy(self) -> "Tour":
        t = Tour.__new__(Tour)
        t.instance = self.instance
        t.order = self.order.copy()
        t.position = self.position.copy()
        t.length = self.length
        return t

    def is_valid(self) -> bool:
        n = self.instance.n
        if self.order.shape != (n,):
            return False
        if not np.array_equal(np.sort(self.order), np.arange(n)):
            return False
        return bool(np.all(self.position[self.order] == np.arange(n)))

    def __repr__(self) -> str:
        return f"Tour(n={self.n}, length={self.length:.6f})"


def tour_length(tour: Tour) -> float:
    inst = tour.instance
    if tour.n < 2:
        return 0.0
    return float(path_lengths(inst.coords, tour.order, inst.tsplib_rounding).sum())


# --- TSPLIB -----------------------------------------------------------------

_SECTION_KEYS = {"NODE_COORD_SECTION", "EOF", "TOUR_SECTION", "DISPLAY_DATA_SECTION"}


def load_tsplib(path, allow_duplicates: bool = False, tsplib_rounding: bool = False) -> Instance:
    """Read a TSPLIB ``.tsp`` file with EUC_2D weights.

    A missing EOF line is tolerated as long as all coordinates are present.
    """
    path = Path(path)
    text = path.read_text()
    header: dict[str, str] = {}
    coords: dict[int, tuple[float, float]] = {}
    in_coords = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if in_coords:
            parts = line.split()
            if len(parts) != 3:
                if ":" in line or line.upper() in _SECTION_KEYS:
                    in_coords = False
                    continue
                raise TsplibError(f"{path.name}:{lineno}: expected 'id x y', got {line!r}")
            try:
                idx = int(parts[0])
                coords[idx] = (float(parts[1]), float(parts[2]))
            except ValueError as exc:
                raise TsplibError(f"{path.name}:{lineno}: bad coordinate line {line!r}") from exc
            continue
        if line.upper().startswith("NODE_COORD_SECTION"):
            in_coords = True
            continue
        if ":" in line:
            key, _, value = line.partition(":")
            header[key.strip().upper()] = value.strip()
        elif line.upper() in _SECTION_KEYS:
            # Some other data section we do not read.
            in_coords = False
        else:
            raise TsplibError(f"{path.name}:{lineno}: unrecognised header line {line!r}")

    wtype = header.get("EDGE_WEIGHT_TYPE")
    if wtype is None:
        raise TsplibError(f"{path.name}: missing EDGE_WEIGHT_TYPE")
    if wtype.upper() != "EUC_2D":
        raise TsplibError(f"{path.name}: unsupported EDGE_WEIGHT_TYPE {wtype}")
    if not coords:
        raise TsplibError(f"{path.name}: no NODE_COORD_SECTION entries")
    if "DIMENSION" in header:
        try:
            dim = int(header["DIMENSION"])
        except ValueError as exc:
            raise TsplibError(f"{path.name}: bad DIMENSION {header['DIMENSION']!r}") from exc
        if dim != len(coords):
            raise TsplibError(f"{path.name}: DIMENSION {dim} but {len(coords)} coordinates")
    ids = list(coords)
    pts = [coords[i] for i in ids]
    name = header.get("NAME", path.stem)
    return Instance(pts, name=name, allow_duplicates=allow_duplicates,
                    tsplib_rounding=tsplib_rounding)


def write_tsplib(instance: Instance, path, comment: str | None = None) -> None:
    lines = [f"NAME : {instance.name}", "TYPE : TSP"]
    if comment:
        lines.append(f"COMMENT : {comment}")
    lines += [f"DIMENSION : {instance.n}", "EDGE_WEIGHT_TYPE : EUC_2D", "NODE_COORD_SECTION"]
    for i, (x, y) in enumerate(instance.coords, 1):
        lines.append(f"{i} {float(x)!r} {float(y)!r}")
    lines.append("EOF")
    Path(path).write_text("\n".join(lines) + "\n")


def write_tour(tour: Tour, path, name: str | None = None) -> None:
    """Write a TSPLIB ``.tour`` file (1-based ids, terminated by -1)."""
    name = name or f"{tour.instance.name}.tour"
    lines = [
        f"NAME : {name}",
        "TYPE : TOUR",
        f"COMMENT : length {tour.length!r}",
        f"DIMENSION : {tour.n}",
        "TOUR_SECTION",
    ]
    lines += [str(int(v) + 1) for v in tour.order]
    lines += ["-1", "EOF"]
    Path(path).write_text("\n".join(lines) + "\n")


def read_tour(path, instance: Instance) -> Tour:
    order = []
    in_section = False
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line == "TOUR_SECTION":
            in_section = True
            continue
        if in_section:
            for tok in line.split():
                v = int(tok)
                if v == -1:
                    return Tour(instance, [x - 1 for x in order])
                order.append(v)
    if not order:
        raise TsplibError(f"{path}: no TOUR_SECTION")
    return Tour(instance, [x - 1 for x in order])
