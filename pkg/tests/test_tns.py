import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from hyperns.heatmap import build_heatmap_graph
from hyperns.hypertour import hyper_tour
from hyperns.initialization import initialize_tour
from hyperns.instance import Instance, Tour
from hyperns.lk import held_karp_exact
from hyperns.pipeline import generate_instance
from hyperns.tns import (EdgeStats, TnsConfig, build_destroy_set, compress_segments, expand, repair, run_tns,
                         score, select_edge, survivor_factor, update_stats)


def _stats(entries):
    s = EdgeStats()
    for e, (w, q, o) in entries.items():
        s.W[e], s.Q[e], s.O[e] = w, q, o
        s.sumQ += q
    return s


def test_score_examples():
    s = _stats({(0, 1): (150.0, 5, 0.0), (1, 2): (50.0, 0, 10000.0), (2, 3): (80.0, 40, -math.inf)})
    assert s.sumQ == 45
    assert score((0, 1), s, 45, 1000.0) == pytest.approx(150 + 5000 / 46, abs=1e-12)
    assert score((0, 1), s, 45, 1000.0) == pytest.approx(258.6956521739, abs=1e-9)
    assert score((1, 2), s, 45, 1000.0) == 10050.0
    assert score((2, 3), s, 45, 1000.0) == -math.inf
    assert select_edge(s, 1000.0) == (1, 2)


def test_select_edge_ties_and_exhaustion():
    s = _stats({(3, 4): (10.0, 0, 0.0), (1, 9): (10.0, 0, 0.0)})
    assert select_edge(s) == (1, 9)
    assert select_edge(_stats({(0, 1): (1.0, 0, -math.inf)})) is None


@given(st.integers(1, 50), st.integers(0, 2**31 - 1))
def test_select_edge_matches_brute_force_argmax(k, seed):
    r = np.random.default_rng(seed)
    entries = {}
    while len(entries) < k:
        a, b = sorted(r.choice(100, 2, replace=False).tolist())
        # Coarse values give ties.
        entries[(a, b)] = (float(r.integers(0, 5)) * 10, int(r.integers(0, 4)),
                           float(r.choice([0.0, 10000.0, -math.inf])))
    s = _stats(entries)
    scored = [(score(e, s, s.sumQ, 1000.0), e) for e in entries]
    finite = [x for x in scored if x[0] > -math.inf]
    got = select_edge(s, 1000.0)
    if not finite:
        assert got is None
    else:
        best = max(v for v, _ in finite)
        assert got == min(e for v, e in finite if v == best)


def test_stats_from_tour_initial_values():
    inst = Instance([[0, 0], [3, 0], [3, 4], [0, 4]])
    t = Tour(inst, [0, 1, 2, 3])
    s = EdgeStats.from_tour(t, worth_deletion={(1, 2)})
    assert s.W[(0, 1)] == pytest.approx(300.0)
    assert s.W[(1, 2)] == pytest.approx(400.0)
    assert s.O[(1, 2)] == 10000.0 and s.O[(0, 1)] == 0.0
    assert set(s.keys()) == t.edge_set() and s.sumQ == 0


def test_destroy_set_m0_is_three_edges(rng):
    inst = Instance(rng.random((12, 2)))
    t = Tour(inst, np.arange(12))
    deleted, affected = build_destroy_set(t, (4, 5), 0)
    assert affected == {4, 5}
    assert deleted == [(3, 4), (4, 5), (5, 6)]


@given(st.integers(6, 60), st.integers(0, 6), st.booleans(), st.integers(0, 2**31 - 1))
def test_destroy_set_matches_scan(n, m, union, seed):
    r = np.random.default_rng(seed)
    pts = r.random((n, 2))
    order = r.permutation(n)
    t = Tour(Instance(pts), order)
    i = int(r.integers(n))
    e = tuple(sorted((int(order[i]), int(order[(i + 1) % n]))))
    na, nb = set(oracles.knn(pts, e[0], m)), set(oracles.knn(pts, e[1], m))
    A = set(e) | (na | nb if union else na & nb)
    expect = sorted(f for f in oracles.tour_edges(order.tolist()) if f[0] in A or f[1] in A)
    deleted, affected = build_destroy_set(t, e, m, union=union)
    assert affected == A
    assert deleted == expect
    assert e in deleted
    # Every subproblem vertex touches a deleted edge, so at most 3|A| of them.
    sub = compress_segments(t, deleted) if len(deleted) < n else None
    if sub is not None:
        assert sub.n <= min(3 * len(A), n)


def _scenario():
    names = ["A", "C", "T", "G", "F", "B", "H", "N", "U", "M", "V", "D", "X1", "X2"]
    xy = {"A": (0, 0), "C": (1, 0), "T": (-0.3, 0.1), "G": (-0.3, -0.1), "F": (-0.4, 0),
          "B": (1.3, 0.1), "H": (1.3, -0.1), "N": (1.4, 0), "U": (-2, 1), "M": (3, 1),
          "V": (-2, -1), "D": (3, -1), "X1": (0.5, 6), "X2": (0.5, -6)}
    idx = {k: i for i, k in enumerate(names)}
    inst = Instance([xy[k] for k in names])
    walk = ["U", "T", "G", "A", "C", "B", "M", "X1", "V", "F", "H", "N", "D", "X2"]
    return inst, Tour(inst, [idx[k] for k in walk]), idx


def test_constructed_destroy_scenario():
    inst, t, idx = _scenario()
    e = tuple(sorted((idx["A"], idx["C"])))
    assert set(inst.knn(idx["A"], 3)) == {idx["T"], idx["G"], idx["F"]}
    assert set(inst.knn(idx["C"], 3)) == {idx["B"], idx["H"], idx["N"]}
    deleted, affected = build_destroy_set(t, e, 3)
    assert len(affected) == 8 and len(deleted) == 10
    sub = compress_segments(t, deleted)
    assert sub.n == 12
    assert len(sub.fixed_edges) == 2
    retained = {int(sub.vertices[a]) for fe in sub.fixed_edges for a in fe}
    assert retained == {idx[k] for k in "UMVD"}
    rep = repair(sub, t, seed=0, kicks=20)
    new = Tour(inst, rep.order)
    assert new.is_valid()
    assert new.length < t.length
    assert rep.length == pytest.approx(new.length, rel=1e-12)
    # Both retained segments survive intact.
    edges = new.edge_set()
    for a, b in (("M", "X1"), ("X1", "V"), ("D", "X2"), ("X2", "U")):
        assert tuple(sorted((idx[a], idx[b]))) in edges


def test_single_deleted_edge_is_a_fixed_point(rng):
    inst = Instance(rng.random((5, 2)))
    t = Tour(inst, np.arange(5))
    sub = compress_segments(t, [(1, 2)])
    assert sub.n == 2 and sub.fixed_edges == [(0, 1)]
    rep = repair(sub, t)
    assert sorted(oracles.tour_edges(rep.order.tolist())) == sorted(t.edge_set())
    assert rep.added == {(1, 2)}


def test_repair_uncrosses():
    # Unit square visited as 0-1-2-3 where (0,1) and (2,3) are crossing diagonals.
    inst = Instance([[0, 0], [1, 1], [1, 0], [0, 1]])
    t = Tour(inst, [0, 1, 2, 3])
    sub = compress_segments(t, [(0, 1), (2, 3)])
    assert sub.n == 4 and len(sub.fixed_edges) == 2
    rep = repair(sub, t, seed=0)
    new = Tour(inst, rep.order)
    assert new.length == pytest.approx(4.0)
    assert new.length < t.length


def test_compress_rejects_foreign_or_empty_edges(rng):
    t = Tour(Instance(rng.random((6, 2))), np.arange(6))
    with pytest.raises(ValueError):
        compress_segments(t, [(0, 3)])
    with pytest.raises(ValueError):
        compress_segments(t, [])


@given(st.integers(5, 40), st.integers(0, 2**31 - 1))
def test_compress_expand_conservation(n, seed):
    r = np.random.default_rng(seed)
    pts = r.random((n, 2))
    t = Tour(Instance(pts), r.permutation(n))
    edges = t.edges()
    k = int(r.integers(1, n))
    deleted = [edges[i] for i in sorted(r.choice(n, k, replace=False))]
    sub = compress_segments(t, deleted)
    assert t.length == pytest.approx(sub.seed_length + sub.interior_excess, rel=1e-9)
    assert np.array_equal(np.sort(expand(sub, sub.seed_order())), np.arange(n))
    rep = repair(sub, t, seed=seed)
    new = Tour(t.instance, rep.order)
    assert new.is_valid()
    assert rep.length == pytest.approx(new.length, rel=1e-6)
    assert new.length <= t.length + 1e-9


def test_survivor_factor_values():
    assert survivor_factor(100, 100) == 1.0
    assert survivor_factor(100, 99) == pytest.approx(2 - math.exp(0.01), abs=1e-15)
    assert survivor_factor(100, 99) == pytest.approx(0.98995, abs=1e-5)
    assert survivor_factor(100, 90) == pytest.approx(0.89483, abs=1e-5)


def test_update_stats_rules():
    inst = Instance([[0, 0], [1, 0], [2, 0], [3, 0], [4, 1]])
    s = _stats({(0, 1): (100.0, 2, 0.0), (1, 2): (100.0, 3, 0.0), (2, 3): (200.0, 1, 10000.0),
                (3, 4): (50.0, 0, 0.0), (0, 4): (400.0, 4, 0.0)})
    # Delete (1,2) and (2,3); (2,3) comes back, (1,3) and ... are new.
    update_stats(s, (2, 3), [(1, 2), (2, 3)], {(2, 3), (1, 3)}, 100.0, 90.0, inst)
    assert (1, 2) not in s
    assert s.W[(2, 3)] == pytest.approx(200.0 * (2 - math.exp(0.1)))
    assert s.Q[(2, 3)] == 0 and s.O[(2, 3)] == -math.inf
    assert s.W[(1, 3)] == pytest.approx(200.0) and s.Q[(1, 3)] == 0 and s.O[(1, 3)] == 0.0
    assert s.Q[(0, 1)] == 3 and s.Q[(3, 4)] == 1 and s.Q[(0, 4)] == 5
    assert s.sumQ == sum(s.Q.values())


def test_weight_is_clamped_at_zero():
    inst = Instance([[0, 0], [1, 0], [0, 1]])
    s = _stats({(0, 1): (100.0, 0, 0.0), (1, 2): (100.0, 0, 0.0), (0, 2): (100.0, 0, 0.0)})
    update_stats(s, (0, 1), [(0, 1)], {(0, 1)}, 100.0, 10.0, inst)
    assert s.W[(0, 1)] == 0.0


def _init(n, seed):
    inst = generate_instance(n, "uniform", seed)
    c, ht = hyper_tour(build_heatmap_graph(inst, seed=seed), seed=seed)
    return inst, initialize_tour(inst, ht, c, seed=seed)


def test_rounds_are_monotone_and_stats_stay_n(rng):
    inst, init = _init(100, 3)
    res = run_tns(inst, init.tour, init.worth_deletion, TnsConfig(m=5, iteration_cap=100, check_invariants=True),
                  seed=1)
    assert res.max_entries == res.min_entries == 100
    lengths = [init.tour.length] + [r[3] for r in res.trace]
    assert all(b <= a for a, b in zip(lengths, lengths[1:]))
    for (_, _, l_old, _, _), (_, _, l_next, _, _) in zip(res.trace, res.trace[1:]):
        assert l_next <= l_old


def test_optimal_tour_is_left_alone():
    pts = np.random.default_rng(11).random((10, 2))
    inst = Instance(pts)
    order, opt = held_karp_exact(pts)
    res = run_tns(inst, Tour(inst, order), config=TnsConfig(m=3))
    assert res.stop_reason in ("converged", "exhausted")
    assert res.iterations <= 30
    assert res.tour.length == pytest.approx(opt, rel=1e-12)


def test_iteration_cap_and_input_untouched(rng):
    inst, init = _init(200, 4)
    before = init.tour.order.copy()
    res = run_tns(inst, init.tour, init.worth_deletion, TnsConfig(iteration_cap=3))
    assert res.iterations == 3 and res.stop_reason == "iteration_cap"
    assert np.array_equal(init.tour.order, before)


def test_improves_initial_tour_at_n1000():
    strict = 0
    for s in range(20):
        inst, init = _init(1000, s)
        res = run_tns(inst, init.tour, init.worth_deletion, seed=s)
        assert res.tour.length <= init.tour.length
        strict += res.tour.length < init.tour.length
    assert strict >= 19
