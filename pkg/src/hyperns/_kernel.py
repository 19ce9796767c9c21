"""Compiled inner loops of the LK search.

Tours are arrays ``order`` / ``pos`` over local ids 0..N-1. ``fixed`` has
shape (N, 2) and lists up to two fixed partners per vertex (-1 = none);
fixed edges are never removed by any move here.
"""

import numpy as np
from numba import njit

EPS = 1e-12


@njit(cache=True)
def _dist(xy, a, b):
    dx = xy[a, 0] - xy[b, 0]
    dy = xy[a, 1] - xy[b, 1]
    return np.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def _is_fixed(fixed, a, b):
    return fixed[a, 0] == b or fixed[a, 1] == b


@njit(cache=True)
def _succ(order, pos, v):
    n = order.shape[0]
    return order[(pos[v] + 1) % n]


@njit(cache=True)
def _pred(order, pos, v):
    n = order.shape[0]
    return order[(pos[v] - 1 + n) % n]


@njit(cache=True)
def _reverse(order, pos, i, j):
    # Reverse the cyclic position range i..j (inclusive).
    n = order.shape[0]
    length = (j - i + n) % n + 1
    for _ in range(length // 2):
        a = order[i]
        b = order[j]
        order[i] = b
        pos[b] = i
        order[j] = a
        pos[a] = j
        i = (i + 1) % n
        j = (j - 1 + n) % n


@njit(cache=True)
def _two_opt_move(order, pos, p1, p2, p3, p4):
    """Replace edges (p1,p2),(p3,p4) by (p1,p3),(p2,p4).

    p2 and p4 must lie on the same side (both successors or both
    predecessors) of p1 and p3 respectively.
    """
    n = order.shape[0]
    if order[(pos[p1] + 1) % n] == p2:
        i, j = pos[p2], pos[p3]
        ai, aj = pos[p4], pos[p1]
    else:
        i, j = pos[p1], pos[p4]
        ai, aj = pos[p3], pos[p2]
    if 2 * ((j - i + n) % n + 1) > n:
        i, j = ai, aj
    _reverse(order, pos, i, j)


@njit(cache=True)
def tour_cost(xy, order):
    n = order.shape[0]
    s = 0.0
    for i in range(n):
        s += _dist(xy, order[i], order[(i + 1) % n])
    return s


@njit(cache=True)
def _in_pairs(pairs, count, a, b):
    for k in range(count):
        if (pairs[k, 0] == a and pairs[k, 1] == b) or (pairs[k, 0] == b and pairs[k, 1] == a):
            return True
    return False


@njit(cache=True)
def _lk_candidates(xy, order, pos, fixed, cand, t1, t2, g, removed, n_removed,
                   added, n_added, width, out_t3, out_t4, out_score):
    """Best `width` (t3, t4) continuations from open edge (t1, t2)."""
    forward = _succ(order, pos, t1) == t2
    s2 = _succ(order, pos, t2)
    p2 = _pred(order, pos, t2)
    count = 0
    for c in range(cand.shape[1]):
        t3 = cand[t2, c]
        if t3 < 0 or t3 == t1 or t3 == t2 or t3 == s2 or t3 == p2:
            continue
        g1 = g - _dist(xy, t2, t3)
        if g1 <= EPS:
            continue
        if forward:
            t4 = _pred(order, pos, t3)
        else:
            t4 = _succ(order, pos, t3)
        if t4 == t1 or t4 == t2:
            continue
        if _is_fixed(fixed, t3, t4):
            continue
        if _in_pairs(added, n_added, t3, t4) or _in_pairs(removed, n_removed, t2, t3):
            continue
        score = _dist(xy, t3, t4) - _dist(xy, t2, t3)
        # Insertion into the small sorted buffer.
        k = count
        if count < width:
            count += 1
        elif score <= out_score[width - 1]:
            continue
        else:
            k = width - 1
        while k > 0 and out_score[k - 1] < score:
            if k < width:
                out_t3[k] = out_t3[k - 1]
                out_t4[k] = out_t4[k - 1]
                out_score[k] = out_score[k - 1]
            k -= 1
        out_t3[k] = t3
        out_t4[k] = t4
        out_score[k] = score
    return count


@njit(cache=True)
def _lk_step(xy, order, pos, fixed, cand, t1, breadth, touched):
    """Variable-depth sequential 2-opt search from t1.

    Returns the number of vertices written to `touched` (0 = no gain).
    """
    depth = breadth.shape[0]
    width = 1
    for b in breadth:
        width = max(width, b)
    c_t3 = np.empty((depth, width), dtype=np.int64)
    c_t4 = np.empty((depth, width), dtype=np.int64)
    c_sc = np.empty((depth, width), dtype=np.float64)
    n_c = np.zeros(depth, dtype=np.int64)
    idx = np.zeros(depth, dtype=np.int64)
    t2s = np.empty(depth + 1, dtype=np.int64)
    g_open = np.empty(depth + 1, dtype=np.float64)
    removed = np.empty((depth + 1, 2), dtype=np.int64)
    added = np.empty((depth + 1, 2), dtype=np.int64)

    for side in range(2):
        if side == 0:
            t2 = _succ(order, pos, t1)
        else:
            t2 = _pred(order, pos, t1)
        if _is_fixed(fixed, t1, t2):
            continue
        t2s[0] = t2
        g_open[0] = _dist(xy, t1, t2)
        removed[0, 0] = t1
        removed[0, 1] = t2
        best_gain = EPS
        best_level = -1
        level = 0
        n_c[0] = _lk_candidates(xy, order, pos, fixed, cand, t1, t2, g_open[0],
                                removed, 1, added, 0, breadth[0],
                                c_t3[0], c_t4[0], c_sc[0])
        idx[0] = 0
        while True:
            if level >= depth or idx[level] >= n_c[level]:
                if best_level >= 0 or level == 0:
                    break
                # Backtrack one level.
                level -= 1
                t3 = c_t3[level, idx[level]]
                t4 = c_t4[level, idx[level]]
                _two_opt_move(order, pos, t1, t4, t2s[level], t3)
                idx[level] += 1
                continue
            t2 = t2s[level]
            t3 = c_t3[level, idx[level]]
            t4 = c_t4[level, idx[level]]
            g1 = g_open[level] - _dist(xy, t2, t3)
            _two_opt_move(order, pos, t1, t2, t4, t3)
            added[level, 0] = t2
            added[level, 1] = t3
            removed[level + 1, 0] = t3
            removed[level + 1, 1] = t4
            gclose = g1 + _dist(xy, t3, t4) - _dist(xy, t4, t1)
            if gclose > best_gain:
                best_gain = gclose
                best_level = level
            g_open[level + 1] = g1 + _dist(xy, t3, t4)
            t2s[level + 1] = t4
            level += 1
            if level < depth:
                w = breadth[level] if best_level < 0 else 1
                n_c[level] = _lk_candidates(xy, order, pos, fixed, cand, t1, t4,
                                            g_open[level], removed, level + 1,
                                            added, level, w,
                                            c_t3[level], c_t4[level], c_sc[level])
                idx[level] = 0
        if best_level >= 0:
            # Undo moves past the best prefix.
            while level > best_level + 1:
                level -= 1
                t3 = c_t3[level, idx[level]]
                t4 = c_t4[level, idx[level]]
                _two_opt_move(order, pos, t1, t4, t2s[level], t3)
            nt = 0
            touched[nt] = t1
            nt += 1
            for lv in range(best_level + 1):
                touched[nt] = t2s[lv]
                touched[nt + 1] = c_t3[lv, idx[lv]]
                touched[nt + 2] = c_t4[lv, idx[lv]]
                nt += 3
            return nt
    return 0


@njit(cache=True)
def _or_opt(xy, order, pos, fixed, cand, t1, max_seg, touched):
    """Move a segment of 1..max_seg vertices with t1 at one end elsewhere."""
    n = order.shape[0]
    for seg_len in range(1, max_seg + 1):
        if n < seg_len + 3:
            break
        for end in range(2):
            if seg_len == 1 and end == 1:
                continue
            if end == 0:
                i0 = pos[t1]
            else:
                i0 = (pos[t1] - seg_len + 1 + n) % n
            s1 = order[i0]
            s2 = order[(i0 + seg_len - 1) % n]
            p = order[(i0 - 1 + n) % n]
            nx = order[(i0 + seg_len) % n]
            if _is_fixed(fixed, p, s1) or _is_fixed(fixed, s2, nx):
                continue
            base = _dist(xy, p, s1) + _dist(xy, s2, nx) - _dist(xy, p, nx)
            if base <= EPS:
                continue
            best = EPS
            bc = -1
            bd = -1
            brev = False
            for which in range(2):
                src = s1 if which == 0 else s2
                for ci in range(cand.shape[1]):
                    c = cand[src, ci]
                    if c < 0:
                        continue
                    for side in range(2):
                        if side == 0:
                            cc = c
                        else:
                            cc = _pred(order, pos, c)
                        dd = _succ(order, pos, cc)
                        # cc must lie outside the segment and not be p.
                        off = (pos[cc] - i0 + n) % n
                        if off < seg_len or cc == p:
                            continue
                        if _is_fixed(fixed, cc, dd):
                            continue
                        rem = base + _dist(xy, cc, dd)
                        fwd = _dist(xy, cc, s1) + _dist(xy, s2, dd)
                        rev = _dist(xy, cc, s2) + _dist(xy, s1, dd)
                        if fwd <= rev:
                            gain = rem - fwd
                            r = False
                        else:
                            gain = rem - rev
                            r = True
                        if gain > best:
                            best = gain
                            bc = cc
                            bd = dd
                            brev = r
            if bc >= 0:
                _two_opt_move(order, pos, p, s1, bc, bd)
                _two_opt_move(order, pos, p, bc, nx, s2)
                if not brev and seg_len > 1:
                    _two_opt_move(order, pos, bc, s2, s1, bd)
                touched[0] = p
                touched[1] = nx
                touched[2] = s1
                touched[3] = s2
                touched[4] = bc
                touched[5] = bd
                return 6
    return 0


@njit(cache=True)
def lk_optimize(xy, order, fixed, cand, active, breadth, max_seg, budget):
    """Run LK + Or-opt from `order` (modified in place) until no vertex in
    the don't-look queue yields an improving move or `budget` moves apply.

    Returns the number of applied improving moves.
    """
    n = order.shape[0]
    pos = np.empty(n, dtype=np.int64)
    for i in range(n):
        pos[order[i]] = i
    if n < 4:
        return 0
    queue = np.empty(n, dtype=np.int64)
    inq = np.zeros(n, dtype=np.bool_)
    head = 0
    size = 0
    for i in range(n):
        v = order[i]
        if active[v]:
            queue[(head + size) % n] = v
            size += 1
            inq[v] = True
    touched = np.empty(3 * breadth.shape[0] + 8, dtype=np.int64)
    moves = 0
    while size > 0 and moves < budget:
        t1 = queue[head]
        head = (head + 1) % n
        size -= 1
        inq[t1] = False
        nt = _lk_step(xy, order, pos, fixed, cand, t1, breadth, touched)
        if nt == 0 and max_seg > 0:
            nt = _or_opt(xy, order, pos, fixed, cand, t1, max_seg, touched)
        if nt > 0:
            moves += 1
            for k in range(nt):
                v = touched[k]
                if not inq[v]:
                    queue[(head + size) % n] = v
                    size += 1
                    inq[v] = True
    return moves


@njit(cache=True)
def double_bridge(order, fixed, cuts):
    """Segment swap A B C D -> A C B D at sorted cut positions.

    Cut c removes edge order[c] -> order[c+1]. Returns the new order, or the
    input unchanged when a cut edge is fixed.
    """
    n = order.shape[0]
    for c in cuts:
        if _is_fixed(fixed, order[c], order[(c + 1) % n]):
            return order.copy()
    a, b, c = cuts[0], cuts[1], cuts[2]
    out = np.empty(n, dtype=np.int64)
    k = 0
    for i in range(0, a + 1):
        out[k] = order[i]
        k += 1
    for i in range(b + 1, c + 1):
        out[k] = order[i]
        k += 1
    for i in range(a + 1, b + 1):
        out[k] = order[i]
        k += 1
    for i in range(c + 1, n):
        out[k] = order[i]
        k += 1
    return out
