"""Numba kernels for CART-style trees.

Classification and regression share one builder. Rows carry a target
vector ``Y`` already multiplied by the sample weight (one-hot labels for
classification, the scalar target for regression). For both Gini and
squared error, the best split maximises |S_L|^2 / w_L + |S_R|^2 / w_R, where
S is the summed target vector and w the summed weight of a side.
"""
import numba
import numpy as np

LEAF = -1


@numba.njit(cache=True)
def _proxy(s, w):
    if w <= 0.0:
        return 0.0
    acc = 0.0
    for c in range(s.shape[0]):
        acc += s[c] * s[c]
    return acc / w


@numba.njit(cache=True)
def build_tree(X, Y, w, max_depth, min_samples_split, max_features, extra, seed):
    np.random.seed(seed)
    n, d = X.shape
    k = Y.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, np.int64)
    right = np.full(cap, LEAF, np.int64)
    value = np.zeros((cap, k))
    weight = np.zeros(cap)

    idx = np.empty(n, np.int64)
    m = 0
    for i in range(n):
        if w[i] > 0.0:
            idx[m] = i
            m += 1
    idx = idx[:m].copy()

    # explicit stack of (node, start, stop, depth)
    stack = np.empty((cap, 4), np.int64)
    top = 0
    stack[top] = (0, 0, m, 0)
    top += 1
    n_nodes = 1
    feats = np.arange(d)
    s_tot = np.zeros(k)
    s_l = np.zeros(k)
    order_vals = np.empty(m)
    while top > 0:
        top -= 1
        node, start, stop, depth = stack[top]
        s_tot[:] = 0.0
        w_tot = 0.0
        for t in range(start, stop):
            i = idx[t]
            w_tot += w[i]
            for c in range(k):
                s_tot[c] += Y[i, c]
        for c in range(k):
            value[node, c] = s_tot[c] / w_tot if w_tot > 0 else 0.0
        weight[node] = w_tot
        if depth >= max_depth or stop - start < min_samples_split:
            continue
        parent = _proxy(s_tot, w_tot)
        best_gain = 1e-12 * max(1.0, abs(parent))
        best_f = -1
        best_thr = 0.0
        best_gap = 0.0
        np.random.shuffle(feats)
        for fi in range(min(max_features, d)):
            f = feats[fi]
            lo = np.inf
            hi = -np.inf
            for t in range(start, stop):
                v = X[idx[t], f]
                lo = min(lo, v)
                hi = max(hi, v)
            if not hi > lo:
                continue
            if extra:
                thr = np.random.uniform(lo, hi)
                if thr >= hi:
                    continue
                s_l[:] = 0.0
                w_l = 0.0
                for t in range(start, stop):
                    i = idx[t]
                    if X[i, f] <= thr:
                        w_l += w[i]
                        for c in range(k):
                            s_l[c] += Y[i, c]
                gain = _proxy(s_l, w_l) + _proxy(s_tot - s_l, w_tot - w_l) - parent
                if gain > best_gain:
                    best_gain, best_f, best_thr = gain, f, thr
                continue
            seg = idx[start:stop]
            for t in range(stop - start):
                order_vals[t] = X[seg[t], f]
            order = np.argsort(order_vals[: stop - start], kind="mergesort")
            s_l[:] = 0.0
            w_l = 0.0
            for t in range(stop - start - 1):
                i = seg[order[t]]
                w_l += w[i]
                for c in range(k):
                    s_l[c] += Y[i, c]
                v0 = order_vals[order[t]]
                v1 = order_vals[order[t + 1]]
                if v1 <= v0:
                    continue
                gain = _proxy(s_l, w_l) + _proxy(s_tot - s_l, w_tot - w_l) - parent
                # near-ties go to the widest gap between neighbouring values
                tol = 1e-9 * max(1.0, abs(best_gain))
                if gain > best_gain + tol or (gain > best_gain - tol and best_f >= 0
                                              and v1 - v0 > best_gap):
                    best_gain, best_f, best_gap = max(gain, best_gain), f, v1 - v0
                    best_thr = v0 + (v1 - v0) / 2.0
                    if best_thr >= v1:
                        best_thr = v0
        if best_f < 0:
            continue
        # partition idx[start:stop] in place
        a, b = start, stop - 1
        while a <= b:
            if X[idx[a], best_f] <= best_thr:
                a += 1
            else:
                tmp = idx[a]
                idx[a] = idx[b]
                idx[b] = tmp
                b -= 1
        if a == start or a == stop:
            continue
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top] = (n_nodes + 1, a, stop, depth + 1)
        stack[top + 1] = (n_nodes, start, a, depth + 1)
        top += 2
        n_nodes += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@numba.njit(cache=True)
def apply_tree(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] != LEAF:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out
