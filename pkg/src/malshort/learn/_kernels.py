"""Compiled inner loops for binary-split tree induction and traversal."""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1
MIN_GAIN = 1e-12


@njit(cache=True, inline="always")
def _entropy(c0, c1):
    n = c0 + c1
    if n <= 0.0 or c0 <= 0.0 or c1 <= 0.0:
        return 0.0
    p0 = c0 / n
    p1 = c1 / n
    return -(p0 * np.log2(p0) + p1 * np.log2(p1))


@njit(cache=True)
def best_split(values, labels, min_leaf, use_gain_ratio):
    """Best midpoint threshold on one feature.

    Returns (score, gain, threshold); score is -1 when no admissible split
    with positive gain exists. ``labels`` are 0/1. Ties keep the lowest
    threshold.
    """
    n = values.shape[0]
    order = np.argsort(values, kind="mergesort")
    sv = values[order]
    sl = labels[order]
    total1 = 0.0
    for i in range(n):
        total1 += sl[i]
    total0 = n - total1
    parent = _entropy(total0, total1)
    best_score = -1.0
    best_gain = 0.0
    best_thr = 0.0
    left1 = 0.0
    for i in range(n - 1):
        left1 += sl[i]
        nl = i + 1
        nr = n - nl
        if nl < min_leaf:
            continue
        if nr < min_leaf:
            break
        if not sv[i] < sv[i + 1]:
            continue
        left0 = nl - left1
        right1 = total1 - left1
        right0 = nr - right1
        child = (nl * _entropy(left0, left1) + nr * _entropy(right0, right1)) / n
        gain = parent - child
        if gain <= MIN_GAIN:
            continue
        score = gain
        if use_gain_ratio:
            score = gain / _entropy(float(nl), float(nr))
        if score > best_score:
            best_score = score
            best_gain = gain
            thr = 0.5 * (sv[i] + sv[i + 1])
            if thr >= sv[i + 1]:
                thr = sv[i]
            best_thr = thr
    return best_score, best_gain, best_thr


@njit(cache=True, nogil=True)
def build_tree(X, y, sample, max_depth, min_leaf, mtry, use_gain_ratio, uniforms):
    """Greedy top-down induction over the rows listed in ``sample``.

    ``sample`` may repeat rows (bootstrap). Candidate features per node are
    all features when ``mtry >= F``, else ``mtry`` drawn without replacement
    using ``uniforms`` (consumed sequentially) and evaluated in index order.
    ``max_depth < 0`` means unlimited.
    """
    m = sample.shape[0]
    F = X.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    counts = np.zeros((cap, 2), dtype=np.int64)

    idx = sample.copy()
    buf = np.empty(m, dtype=np.int64)
    perm = np.arange(F)
    # stack of (node, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    u_pos = 0

    while top > 0:
        top -= 1
        node = stack[top, 0]
        s = stack[top, 1]
        e = stack[top, 2]
        depth = stack[top, 3]
        n = e - s
        c1 = 0
        for k in range(s, e):
            c1 += y[idx[k]]
        c0 = n - c1
        counts[node, 0] = c0
        counts[node, 1] = c1
        if c0 == 0 or c1 == 0 or n < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        if mtry >= F:
            k_feat = F
            for j in range(F):
                perm[j] = j
        else:
            k_feat = mtry
            for j in range(F):
                perm[j] = j
            for j in range(mtry):
                r = j + int(uniforms[u_pos] * (F - j))
                u_pos += 1
                if r >= F:
                    r = F - 1
                tmp = perm[j]
                perm[j] = perm[r]
                perm[r] = tmp
            perm[:mtry] = np.sort(perm[:mtry])

        vals = np.empty(n, dtype=np.float64)
        labs = np.empty(n, dtype=np.float64)
        for k in range(n):
            labs[k] = y[idx[s + k]]
        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        for j in range(k_feat):
            f = perm[j]
            for k in range(n):
                vals[k] = X[idx[s + k], f]
            score, gain, thr = best_split(vals, labs, min_leaf, use_gain_ratio)
            if score > best_score:
                best_score = score
                best_f = f
                best_thr = thr
        if best_f < 0:
            continue

        # stable partition of idx[s:e]
        nl = 0
        for k in range(s, e):
            if X[idx[k], best_f] <= best_thr:
                buf[nl] = idx[k]
                nl += 1
        nr = 0
        for k in range(s, e):
            if not X[idx[k], best_f] <= best_thr:
                buf[nl + nr] = idx[k]
                nr += 1
        for k in range(n):
            idx[s + k] = buf[k]

        lch = n_nodes
        rch = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lch
        right[node] = rch
        stack[top, 0] = rch
        stack[top, 1] = s + nl
        stack[top, 2] = e
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lch
        stack[top, 1] = s
        stack[top, 2] = s + nl
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy())


@njit(cache=True, nogil=True)
def leaf_index(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
