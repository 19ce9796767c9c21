"""Acceptance gate: one test per criterion, each logging a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the criterion lines
are printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES
from hyperns.cli import main
from hyperns.heatmap import build_heatmap_graph, cover_edges
from hyperns.hypertour import cluster_by_bridge_deletion, find_bridges
from hyperns.initialization import nearest_neighbor_tour
from hyperns.instance import Instance, Tour, write_tsplib
from hyperns.lk import held_karp_exact
from hyperns.pipeline import Config, generate_instance, noise_experiment, solve
from hyperns.tns import (InvariantViolation, TnsConfig, build_destroy_set, compress_segments, repair, run_tns,
                         survivor_factor)

pytestmark = pytest.mark.slow


def record(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def tiny_runs():
    r = np.random.default_rng(2024)
    runs = []
    for i in range(50):
        n = int(r.integers(5, 13))
        inst = Instance(r.random((n, 2)), name=f"tiny{i}")
        t = time.perf_counter()
        tour, rep = solve(inst, Config(seed=i))
        runs.append({"inst": inst, "tour": tour, "rep": rep, "time": time.perf_counter() - t})
    return runs


@pytest.fixture(scope="module")
def desk_runs():
    runs = []
    for s in range(10):
        inst = generate_instance(1000, "uniform", seed=1000 + s)
        t = time.perf_counter()
        tour, rep = solve(inst, Config(seed=s))
        runs.append({"inst": inst, "tour": tour, "rep": rep, "time": time.perf_counter() - t,
                     "nn": nearest_neighbor_tour(inst).length})
    return runs


def test_criterion_1_exact_at_tiny_scale(tiny_runs):
    ratios = []
    for run in tiny_runs:
        opt = held_karp_exact(run["inst"].coords)[1]
        assert run["tour"].is_valid()
        ratios.append(run["tour"].length / opt)
    within2 = sum(r <= 1.02 for r in ratios)
    total = sum(r["time"] for r in tiny_runs)
    ok = within2 >= 48 and max(ratios) <= 1.05 and total < 30
    record(1, ok, f"{within2}/50 within 2% of Held-Karp, worst ratio {max(ratios):.4f}, {total:.1f}s total")


def test_criterion_2_desk_scale_quality(desk_runs):
    lengths = [r["tour"].length for r in desk_runs]
    mean = float(np.mean(lengths))
    vs_nn = max(r["tour"].length / r["nn"] for r in desk_runs)
    slowest = max(r["time"] for r in desk_runs)
    ok = mean <= 24.28 and vs_nn <= 0.95 and slowest <= 180
    record(2, ok, f"mean length {mean:.4f} (target <= 24.28), worst final/NN {vs_nn:.3f}, "
                  f"slowest {slowest:.1f}s")


def test_criterion_3_monotone_traces(tiny_runs, desk_runs):
    violations = 0
    rounds = 0
    for run in tiny_runs + desk_runs:
        rep = run["rep"]
        prev = rep.init_len
        for _, _, l_old, l_new, _ in rep.tns_trace:
            rounds += 1
            violations += (l_old > prev) + (l_new > l_old)
            prev = l_new
        for before, after in rep.subtour_passes:
            violations += after > before
        violations += rep.final_len > rep.init_len
    record(3, violations == 0, f"{violations} violations over {rounds} search rounds and "
                               f"{sum(len(r['rep'].subtour_passes) for r in tiny_runs + desk_runs)} sub-tour passes")


def test_criterion_4_edge_stats_stay_n():
    rounds = violations = 0
    seed = 0
    while rounds < 1000:
        r = np.random.default_rng(seed)
        n = int(r.integers(20, 300))
        inst = Instance(r.random((n, 2)))
        tour = Tour(inst, r.permutation(n))
        cfg = TnsConfig(m=int(r.integers(1, 15)), iteration_cap=200, kicks=0, check_invariants=True)
        try:
            res = run_tns(inst, tour, config=cfg, seed=seed)
            rounds += res.iterations
            violations += (res.max_entries != n) + (res.min_entries != n) + (res.peak_entries != n)
        except InvariantViolation:
            violations += 1
        seed += 1
    record(4, violations == 0, f"{violations} violations over {rounds} rounds on {seed} instances")


def test_criterion_5_destroy_repair_soundness():
    r = np.random.default_rng(55)
    n = 100
    violations = 0
    for k in range(1000):
        if k % 100 == 0:
            inst = Instance(r.random((n, 2)))
            tour = Tour(inst, r.permutation(n))
        edges = tour.edges()
        e = edges[int(r.integers(n))]
        deleted, _ = build_destroy_set(tour, e, int(r.integers(0, 12)), union=bool(r.random() < 0.8))
        sub = compress_segments(tour, deleted)
        rep = repair(sub, tour, seed=k)
        new = Tour(inst, rep.order)
        ok = new.is_valid() and abs(rep.length - new.length) <= 1e-6 * new.length
        ok = ok and new.length <= tour.length + 1e-9 * tour.length
        violations += not ok
        tour = new
    record(5, violations == 0, f"{violations} violations over 1000 rounds at n=100")


def test_criterion_6_bridge_clustering():
    r = np.random.default_rng(66)
    mismatches = bad_clusters = 0
    for g in range(100):
        n = int(r.integers(2, 201))
        avg_deg = r.uniform(1.0, 4.0)
        m = int(avg_deg * n / 2)
        edges = {tuple(sorted(r.choice(n, 2, replace=False).tolist())) for _ in range(m)}
        adj = [set() for _ in range(n)]
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        mismatches += find_bridges(adj) != oracles.bridges(n, edges)
        c = cluster_by_bridge_deletion(adj, r.random((n, 2)))
        for cl in c.clusters:
            if len(cl) > 1 and not oracles.is_two_edge_connected(cl, edges):
                bad_clusters += 1
    record(6, mismatches == 0 and bad_clusters == 0,
           f"{mismatches} bridge mismatches, {bad_clusters} clusters not 2-edge-connected over 100 graphs")


def _knn_oracle(pts, k):
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    np.fill_diagonal(d, np.inf)
    ids = np.broadcast_to(np.arange(len(pts)), d.shape)
    return [np.lexsort((ids[v], d[v]))[:k] for v in range(len(pts))]


def test_criterion_7_edge_coverage():
    r = np.random.default_rng(77)
    uncovered = over_k = 0
    for i in range(50):
        n = int(r.integers(10, 501))
        p = int(r.integers(5, 101))
        k = int(r.integers(1, 4))
        pts = r.random((n, 2))
        inst = Instance(pts)
        cov = cover_edges(inst, p=p, gamma=30, seed=i, k_cov=10)
        member = [set(cs.members.tolist()) for cs in cov.sets]
        kk = min(10, p - 1, n - 1)
        for u, row in enumerate(_knn_oracle(pts, kk)):
            for w in row:
                if not any(u in s and int(w) in s for s in member):
                    uncovered += 1
        g = build_heatmap_graph(inst, p=p, gamma=30, k=k, k_cov=10, seed=i)
        over_k += sum(len(row) > k for row in g.selected)
    record(7, uncovered == 0 and over_k == 0,
           f"{uncovered} uncovered universe edges, {over_k} vertices above k over 50 instances")


def test_criterion_8_survivor_factor():
    cases = {(100, 100): 1.0, (100, 99): 0.98995, (100, 90): 0.89483}
    errs = []
    for (lo, ln), approx in cases.items():
        direct = 1.0 - (math.exp((lo - ln) / lo) - 1.0)
        got = survivor_factor(lo, ln)
        errs.append(abs(got - direct))
        assert abs(got - approx) < 5e-6
    record(8, max(errs) <= 1e-9, f"max deviation from direct evaluation {max(errs):.1e}")


def test_criterion_9_noise_robustness():
    inst = generate_instance(1000, "uniform", seed=9)
    t = time.perf_counter()
    res = noise_experiment(inst, levels=[0.0, 0.05, 0.1], seeds=10)
    elapsed = time.perf_counter() - t
    lv = {row["level"]: row for row in res["levels"]}
    spreads = {a: lv[a]["std_final_len"] / lv[a]["mean_final_len"] for a in lv}
    ok = all(s <= 0.01 for s in spreads.values()) and lv[0.1]["mean_final_len"] >= lv[0.0]["mean_final_len"]
    ok = ok and elapsed <= 3600
    means = ", ".join(f"{a}: {lv[a]['mean_final_len']:.4f}" for a in sorted(lv))
    record(9, ok, f"final means {{{means}}}, max rel std {max(spreads.values()):.4f}, {elapsed:.0f}s")


def test_criterion_10_determinism(tmp_path):
    same = 0
    cases = [("uniform", 1000, 0), ("clustered", 1000, 1), ("explosion", 500, 2)]
    for dist, n, s in cases:
        tsp = tmp_path / f"{dist}.tsp"
        write_tsplib(generate_instance(n, dist, s), tsp)
        outs = []
        for rep in ("a", "b"):
            tour_path, report_path = tmp_path / f"{dist}{rep}.tour", tmp_path / f"{dist}{rep}.json"
            main(["solve", str(tsp), "--seed", str(s), "--out", str(tour_path), "--report", str(report_path)])
            outs.append((tour_path.read_bytes(), report_path.read_bytes()))
        same += outs[0] == outs[1]
    record(10, same == len(cases), f"{same}/{len(cases)} repeated solves byte-identical")
