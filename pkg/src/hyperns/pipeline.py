"""End-to-end solver, instance generators, batch benchmark and noise study."""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .heatmap import DistanceHeatProvider, build_heatmap_graph, load_heatmap_file
from .hypertour import hyper_tour
from .initialization import InitResult, initialize_tour, nearest_neighbor_tour, random_tour, worth_deletion_edges
from .instance import Instance, Tour, load_tsplib
from .subtour import optimize_subtours
from .tns import TnsConfig, run_tns

INIT_MODES = ("hyper", "greedy", "random")
HEATMAP_PROVIDERS = ("distance", "file")
DISTRIBUTIONS = ("uniform", "clustered", "explosion", "implosion")
STAGES = ("heatmap", "hypertour", "init", "tns", "subtour")


class StageError(RuntimeError):
    """A stage produced output that breaks one of its invariants."""


@dataclass(frozen=True)
class Config:
    """Solver settings. `iteration_cap=None` means 20 n TNS rounds."""

    p: int = 100
    gamma: int = 30
    k: int = 2
    k_cov: int = 10
    tau: float = 1.0
    l_s: int = 100
    m: int = 100
    alpha: float = 1000.0
    i3: int = 2
    seed: int = 0
    iteration_cap: int | None = None
    init_mode: str = "hyper"
    heatmap_provider: str = "distance"
    heatmap_path: str | None = None
    tsplib_rounding: bool = False
    # Search effort knobs.
    union: bool = True
    hyper_kicks: int = 50
    init_kicks: int = 0
    repair_kicks: int = 20
    subtour_kicks: int = 20
    random_starts: bool = False
    heat_noise: float = 0.0
    noise_seed: int | None = None

    def __post_init__(self):
        for name in ("p", "gamma", "k", "k_cov", "l_s", "m", "i3"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.l_s < 3:
            raise ValueError("l_s must be >= 3")
        if self.alpha <= 0 or self.tau <= 0:
            raise ValueError("alpha and tau must be positive")
        if self.iteration_cap is not None and self.iteration_cap < 1:
            raise ValueError("iteration_cap must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")
        if self.heatmap_provider not in HEATMAP_PROVIDERS:
            raise ValueError(f"heatmap_provider must be one of {HEATMAP_PROVIDERS}")
        if self.heatmap_provider == "file" and not self.heatmap_path:
            raise ValueError("heatmap_provider 'file' needs heatmap_path")

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)


@dataclass
class RunReport:
    instance: str
    n: int
    init_len: float
    final_len: float
    gap: float | None = None
    stage_times: dict[str, float] = field(default_factory=dict)
    i1: int = 0
    i2: int = 0
    peak_edge_stats: int = 0
    tns_trace: list[tuple] = field(default_factory=list, repr=False)
    subtour_passes: list[tuple[float, float]] = field(default_factory=list, repr=False)

    def to_dict(self, include_timings: bool = False) -> dict:
        """JSON-ready report. Times are nulled unless asked for, so reruns compare equal."""
        times = {s: (round(self.stage_times.get(s, 0.0), 6) if include_timings else None) for s in STAGES}
        out = {
            "instance": self.instance,
            "n": self.n,
            "init_len": self.init_len,
            "final_len": self.final_len,
        }
        if self.gap is not None:
            out["gap"] = self.gap
        out.update({"stage_times": times, "i1": self.i1, "i2": self.i2,
                    "peak_edge_stats": self.peak_edge_stats})
        return out


def gap(length: float, reference: float) -> float:
    return (length - reference) / reference


def _validate_tour(tour: Tour, stage: str) -> None:
    if not tour.is_valid():
        raise StageError(f"{stage}: tour is not a permutation of all vertices")


def _tns_config(cfg: Config) -> TnsConfig:
    return TnsConfig(m=cfg.m, alpha=cfg.alpha, iteration_cap=cfg.iteration_cap, union=cfg.union,
                     kicks=cfg.repair_kicks)


def solve(instance: Instance, config: Config | None = None, ref_len: float | None = None,
          on_round: Callable[[tuple], None] | None = None, hypertour_out: list | None = None):
    """Run heatmap, hyper tour, initialisation, TNS and sub-tour passes in order.

    Returns (Tour, RunReport). Every stage's output is checked before the
    next one starts; a violation raises `StageError`. `hypertour_out`, if
    given, receives the (Clustering, HyperTour) pair.
    """
    cfg = config or Config()
    if cfg.tsplib_rounding != instance.tsplib_rounding:
        instance = Instance(instance.coords, instance.name, allow_duplicates=True,
                            tsplib_rounding=cfg.tsplib_rounding)
    n = instance.n
    if n < 3:
        raise ValueError("need at least 3 vertices")
    rng = np.random.default_rng(cfg.seed)
    seeds = rng.integers(2**32, size=5)
    times: dict[str, float] = {}

    t = time.perf_counter()
    if cfg.heatmap_provider == "file":
        graph = load_heatmap_file(cfg.heatmap_path, instance, cfg.k)
    else:
        graph = build_heatmap_graph(instance, cfg.p, cfg.gamma, cfg.k, cfg.k_cov,
                                    DistanceHeatProvider(cfg.tau), seed=int(seeds[0]),
                                    noise=cfg.heat_noise, noise_seed=cfg.noise_seed)
    if any(len(row) > cfg.k for row in graph.selected):
        raise StageError("heatmap: a vertex keeps more than k candidate edges")
    times["heatmap"] = time.perf_counter() - t

    t = time.perf_counter()
    clustering, ht = hyper_tour(graph, seed=int(seeds[1]), kicks=cfg.hyper_kicks, config=cfg)
    if sorted(int(v) for v in ht.order) != list(range(len(clustering))):
        raise StageError("hypertour: order is not a permutation of the supernodes")
    if hypertour_out is not None:
        hypertour_out.extend((clustering, ht))
    times["hypertour"] = time.perf_counter() - t

    t = time.perf_counter()
    if cfg.init_mode == "hyper":
        init = initialize_tour(instance, ht, clustering, cfg.l_s, seed=int(seeds[2]), gamma=cfg.gamma,
                               kicks=cfg.init_kicks)
    else:
        tour0 = nearest_neighbor_tour(instance) if cfg.init_mode == "greedy" else random_tour(instance, int(seeds[2]))
        init = InitResult(tour0, worth_deletion_edges(tour0, clustering.vertex_to_cluster))
    _validate_tour(init.tour, "init")
    if not init.worth_deletion <= init.tour.edge_set():
        raise StageError("init: a worth-deletion edge is missing from the tour")
    times["init"] = time.perf_counter() - t

    t = time.perf_counter()
    tns = run_tns(instance, init.tour, init.worth_deletion, _tns_config(cfg), seed=int(seeds[3]),
                  on_round=on_round)
    _validate_tour(tns.tour, "tns")
    if tns.max_entries != n or tns.min_entries != n:
        raise StageError(f"tns: edge statistics held {tns.min_entries}..{tns.max_entries} entries, expected {n}")
    if tns.tour.length > init.tour.length:
        raise StageError("tns: length increased")
    times["tns"] = time.perf_counter() - t

    t = time.perf_counter()
    sub = optimize_subtours(tns.tour, cfg.l_s, cfg.i3, seed=int(seeds[4]), kicks=cfg.subtour_kicks,
                            random_starts=cfg.random_starts)
    _validate_tour(sub.tour, "subtour")
    if sub.tour.length > tns.tour.length:
        raise StageError("subtour: length increased")
    times["subtour"] = time.perf_counter() - t

    final = sub.tour
    report = RunReport(
        instance=instance.name,
        n=n,
        init_len=init.tour.length,
        final_len=final.length,
        gap=gap(final.length, ref_len) if ref_len else None,
        stage_times=times,
        i1=clustering.iterations,
        i2=tns.iterations,
        peak_edge_stats=tns.peak_entries,
        tns_trace=tns.trace,
        subtour_passes=sub.passes,
    )
    return final, report


# --- instance generation --------------------------------------------------------

CLUSTER_SIGMA = 0.02
CLUSTER_SIZE = 500
DISK_RADIUS = 0.2


def _redraw_duplicates(pts: np.ndarray, draw: Callable[[int], np.ndarray]) -> np.ndarray:
    while True:
        _, first = np.unique(pts, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(len(pts)), first)
        if len(dup) == 0:
            return pts
        pts[dup] = draw(len(dup))


def generate_instance(n: int, dist: str = "uniform", seed=0, name: str | None = None) -> Instance:
    """Random instance in the unit square.

    clustered: ceil(n/500) uniform centres, Gaussian offsets with sigma 0.02,
    clipped to the square. explosion: points within 0.2 of a random centre
    are pushed out to that radius. implosion: the same disk is contracted,
    r -> r^2 / 0.2.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"dist must be one of {DISTRIBUTIONS}")
    rng = np.random.default_rng(seed)
    name = name or f"{dist}-{n}-{seed}"
    if dist == "clustered":
        centers = rng.random((math.ceil(n / CLUSTER_SIZE), 2))

        def draw(k):
            c = centers[rng.integers(len(centers), size=k)]
            return np.clip(c + rng.normal(0.0, CLUSTER_SIGMA, size=(k, 2)), 0.0, 1.0)

        return Instance(_redraw_duplicates(draw(n), draw), name)
    pts = _redraw_duplicates(rng.random((n, 2)), lambda k: rng.random((k, 2)))
    if dist == "uniform":
        return Instance(pts, name)
    center = rng.random(2)
    d = pts - center
    r = np.hypot(d[:, 0], d[:, 1])
    inside = (r < DISK_RADIUS) & (r > 0)
    if dist == "explosion":
        scale = DISK_RADIUS / r[inside]
        new = center + d[inside] * scale[:, None]
        # Rounding can leave a point a hair inside the disk; nudge it out.
        rr = np.hypot(*(new - center).T)
        while np.any(rr < DISK_RADIUS):
            low = rr < DISK_RADIUS
            new[low] = center + (new[low] - center) * (1 + 1e-15)
            rr = np.hypot(*(new - center).T)
        pts[inside] = new
    else:
        scale = r[inside] / DISK_RADIUS
        pts[inside] = center + d[inside] * scale[:, None]
    pts = _redraw_duplicates(pts, lambda k: rng.random((k, 2)))
    return Instance(pts, name)


# --- batch --------------------------------------------------------------------

def read_refs(path) -> dict[str, float]:
    """Reference lengths from `name<TAB or space>length` lines."""
    refs = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, value = line.split()[:2]
        refs[name] = float(value)
    return refs


def worker_count(jobs: int | None) -> int:
    jobs = jobs or os.cpu_count() or 1
    cap = os.environ.get("HYPERNS_THREADS")
    if cap:
        jobs = min(jobs, max(1, int(cap)))
    return max(1, jobs)


def _bench_one(path: str, cfg: Config, refs: dict[str, float]) -> dict:
    p = Path(path)
    try:
        inst = load_tsplib(p, tsplib_rounding=cfg.tsplib_rounding)
        ref = refs.get(inst.name, refs.get(p.stem))
        t = time.perf_counter()
        _, rep = solve(inst, cfg, ref_len=ref)
        row = rep.to_dict(include_timings=True)
        row["file"] = p.name
        row["time"] = time.perf_counter() - t
        return row
    except Exception as exc:  # recorded per instance; the batch keeps going
        return {"file": p.name, "instance": p.stem, "error": f"{type(exc).__name__}: {exc}"}


def aggregate(rows: list[dict]) -> dict:
    ok = [r for r in rows if "error" not in r]
    gaps = [r["gap"] for r in ok if "gap" in r]
    return {
        "instances": len(rows),
        "failed": len(rows) - len(ok),
        "mean_length": float(np.mean([r["final_len"] for r in ok])) if ok else None,
        "mean_gap": float(np.mean(gaps)) if gaps else None,
        "total_time": float(sum(r.get("time", 0.0) for r in ok)),
    }


def benchmark(directory, config: Config | None = None, refs: dict[str, float] | None = None,
              jobs: int | None = None) -> dict:
    """Solve every ``*.tsp`` file in `directory`; returns {"rows": [...], "aggregate": {...}}."""
    cfg = config or Config()
    refs = refs or {}
    files = sorted(str(p) for p in Path(directory).glob("*.tsp"))
    workers = min(worker_count(jobs), max(1, len(files)))
    if workers == 1 or len(files) <= 1:
        rows = [_bench_one(f, cfg, refs) for f in files]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_one, files, [cfg] * len(files), [refs] * len(files)))
    return {"rows": rows, "aggregate": aggregate(rows)}


# --- noise study ----------------------------------------------------------------

def _bins(runs: list[dict], count: int = 10) -> list[dict]:
    lengths = np.array([r["init_len"] for r in runs])
    lo, hi = float(lengths.min()), float(lengths.max())
    edges = np.linspace(lo, hi, count + 1) if hi > lo else np.array([lo, hi])
    idx = np.clip(np.searchsorted(edges, lengths, side="right") - 1, 0, len(edges) - 2)
    out = []
    for b in range(len(edges) - 1):
        members = [r for r, i in zip(runs, idx) if i == b]
        if not members:
            continue
        out.append({
            "bin": b + 1,
            "range": [float(edges[b]), float(edges[b + 1])],
            "count": len(members),
            "avg_init_len": float(np.mean([m["init_len"] for m in members])),
            "avg_final_len": float(np.mean([m["final_len"] for m in members])),
            "avg_time": float(np.mean([m["time"] for m in members])),
        })
    return out


def noise_experiment(instance: Instance, levels=(0.0, 0.05, 0.1, 0.2), seeds: int = 10,
                     config: Config | None = None) -> dict:
    """Solve with heat perturbed by U(-a, a) for each level a and seed 0..seeds-1.

    Reports per-level statistics and runs grouped into bins of initial length.
    """
    cfg = config or Config()
    runs = []
    for level in levels:
        for s in range(seeds):
            t = time.perf_counter()
            _, rep = solve(instance, cfg.replace(seed=s, heat_noise=float(level), noise_seed=s))
            runs.append({"level": float(level), "seed": s, "init_len": rep.init_len,
                         "final_len": rep.final_len, "time": time.perf_counter() - t})
    per_level = []
    for level in levels:
        rs = [r for r in runs if r["level"] == float(level)]
        fin = np.array([r["final_len"] for r in rs])
        ini = np.array([r["init_len"] for r in rs])
        per_level.append({
            "level": float(level),
            "runs": len(rs),
            "mean_init_len": float(ini.mean()),
            "std_init_len": float(ini.std()),
            "mean_final_len": float(fin.mean()),
            "std_final_len": float(fin.std()),
            "mean_time": float(np.mean([r["time"] for r in rs])),
        })
    return {"instance": instance.name, "n": instance.n, "levels": per_level, "bins": _bins(runs),
            "runs": runs}


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")
