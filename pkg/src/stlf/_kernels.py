"""JIT-compiled inner loops.

Only the two genuinely hot paths live here: the sequential smoothing-state
pass (called thousands of times per parameter fit) and regression-tree
growth/prediction (hundreds of trees per lead time). Everything is
deterministic: the only randomness is an explicit splitmix64 counter stream.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U64_MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64(x: int) -> int:
    """One splitmix64 mixing step (pure Python twin of the jitted stream)."""
    x = (x + 0x9E3779B97F4A7C15) & _U64_MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64_MASK
    return z ^ (z >> 31)


def derive_seed(base: int, *steps: int) -> int:
    """Counter-based seed derivation: fold each step into the stream."""
    s = base & _U64_MASK
    for step in steps:
        s = splitmix64((s ^ ((step & _U64_MASK) * 0xBF58476D1CE4E5B9)) & _U64_MASK)
    return s


@njit(cache=True, nogil=True)
def dshw_pass(y, alpha, gamma_day, gamma_week, level0, day0, week0):
    """Run the double-seasonal smoothing recursions over ``y``.

    Index histories are returned with offsets so post-processing can read
    any lagged value directly: ``L[t]`` is the level before observation t,
    ``D[t]`` / ``W[t]`` are the daily/weekly index values one full cycle
    before t, and ``fitted[t]`` is the seasonal product used in the
    autocorrelation adjustment.
    """
    n = y.shape[0]
    s1 = day0.shape[0]
    s2 = week0.shape[0]
    L = np.empty(n + 1)
    D = np.empty(n + s1)
    W = np.empty(n + s2)
    fitted = np.empty(n)
    for i in range(s1):
        D[i] = day0[i]
    for i in range(s2):
        W[i] = week0[i]
    L[0] = level0
    for t in range(n):
        dlag = D[t]
        wlag = W[t]
        lprev = L[t]
        fitted[t] = lprev * dlag * wlag
        yt = y[t]
        level = alpha * yt / (dlag * wlag) + (1.0 - alpha) * lprev
        D[t + s1] = gamma_day * yt / (level * wlag) + (1.0 - gamma_day) * dlag
        W[t + s2] = gamma_week * yt / (level * dlag) + (1.0 - gamma_week) * wlag
        L[t + 1] = level
    return L, D, W, fitted


@njit(cache=True, nogil=True)
def arma_innovations(w, ar, ma, mean, t0):
    """Innovations of an ARMA recursion over ``w`` with zero pre-sample
    innovations, starting the sum at ``t0 >= max(p, q)``."""
    n = w.shape[0]
    p = ar.shape[0]
    q = ma.shape[0]
    e = np.zeros(n)
    for t in range(t0, n):
        acc = w[t] - mean
        for i in range(p):
            acc -= ar[i] * (w[t - 1 - i] - mean)
        for j in range(q):
            acc -= ma[j] * e[t - 1 - j]
        e[t] = acc
    return e[t0:]


@njit(cache=True, nogil=True, inline="always")
def _mix(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def grow_tree(X, y, rows, mtry, min_node, seed):
    """Grow one CART regression tree on the ``rows`` subsample of ``X``.

    Splits maximize variance reduction over midpoints of adjacent distinct
    values of ``mtry`` features drawn without replacement per node; both
    children must keep at least ``min_node`` rows. Returns parallel node
    arrays (feature == -1 marks a leaf).
    """
    m_total = rows.shape[0]
    n_feat = X.shape[1]
    cap = 2 * (m_total // min_node) + 1
    if cap < 1:
        cap = 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap)

    idx = rows.copy()
    scratch = np.empty(m_total, dtype=idx.dtype)
    feat_pool = np.empty(n_feat, dtype=np.int32)

    # Explicit stack of (node, lo, hi) keeps the depth bounded regardless of
    # how unbalanced the tree gets.
    stack_node = np.empty(cap, dtype=np.int32)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = m_total
    top = 1
    n_nodes = 1
    rng = np.uint64(seed)

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo

        total = 0.0
        tmin = y[idx[lo]]
        tmax = tmin
        for i in range(lo, hi):
            ti = y[idx[i]]
            total += ti
            if ti < tmin:
                tmin = ti
            if ti > tmax:
                tmax = ti
        mean = total / m
        value[node] = mean

        if m < 2 * min_node or tmin == tmax:
            continue

        parent_score = total * total / m
        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        best_nl = 0

        for i in range(n_feat):
            feat_pool[i] = i
        n_pool = n_feat
        n_draw = mtry if mtry < n_feat else n_feat
        for _ in range(n_draw):
            rng, z = _mix(rng)
            pick = np.int64(z % np.uint64(n_pool))
            f = feat_pool[pick]
            feat_pool[pick] = feat_pool[n_pool - 1]
            n_pool -= 1

            v = np.empty(m)
            t = np.empty(m)
            for i in range(m):
                v[i] = X[idx[lo + i], f]
            order = np.argsort(v)
            for i in range(m):
                t[i] = y[idx[lo + order[i]]]
            sv = v[order]

            cum = 0.0
            for i in range(1, m):
                cum += t[i - 1]
                if sv[i] <= sv[i - 1]:
                    continue
                if i < min_node or m - i < min_node:
                    continue
                gain = cum * cum / i + (total - cum) * (total - cum) / (m - i) - parent_score
                if gain > best_gain:
                    thr = 0.5 * (sv[i - 1] + sv[i])
                    if thr >= sv[i]:  # midpoint rounded up to the right value
                        thr = sv[i - 1]
                    best_gain = gain
                    best_feat = f
                    best_thr = thr
                    best_nl = i

        if best_feat < 0:
            continue  # no drawn feature reduces variance: forced leaf

        # Stable partition of the segment around the chosen threshold.
        nl = 0
        nr = 0
        for i in range(lo, hi):
            if X[idx[i], best_feat] <= best_thr:
                scratch[nl] = idx[i]
                nl += 1
            else:
                scratch[best_nl + nr] = idx[i]
                nr += 1
        for i in range(m):
            idx[lo + i] = scratch[i]

        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        child_l = n_nodes
        child_r = n_nodes + 1
        n_nodes += 2

        stack_node[top] = child_r
        stack_lo[top] = lo + best_nl
        stack_hi[top] = hi
        top += 1
        stack_node[top] = child_l
        stack_lo[top] = lo
        stack_hi[top] = lo + best_nl
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def predict_tree(feature, threshold, left, right, value, X, out):
    """Add each row's leaf value into ``out`` (accumulator for forest means)."""
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += value[node]
