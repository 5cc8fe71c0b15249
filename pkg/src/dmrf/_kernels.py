"""Compiled inner loops for split scanning and tree routing.

Everything here works on index arrays into a column-major feature matrix so
that node samples never get copied out of the dataset.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def gini_from_counts(counts, total):
    s = 0.0
    for k in range(counts.shape[0]):
        p = counts[k] / total
        s += p * p
    return 1.0 - s


@njit(cache=True)
def sort_node(x, idx):
    """``idx`` reordered by ascending ``x`` (stable, so ties keep their order)."""
    vals = np.empty(idx.shape[0])
    for i in range(idx.shape[0]):
        vals[i] = x[idx[i]]
    return idx[np.argsort(vals, kind="mergesort")].astype(np.int32)


@njit(cache=True)
def class_scan_ordered(x, y, order, n_classes):
    """Weighted Gini reduction for every candidate threshold of one column.

    ``order`` lists the node's samples by ascending ``x``. Returns
    ``(thresholds, reductions)``; thresholds ascend and exclude the node
    maximum of the column.
    """
    n = order.shape[0]
    parent = np.zeros(n_classes)
    for i in range(n):
        parent[y[order[i]]] += 1.0
    g_parent = gini_from_counts(parent, n)
    left = np.zeros(n_classes)
    right = parent.copy()
    thr = np.empty(n)
    red = np.empty(n)
    m = 0
    for k in range(n - 1):
        lab = y[order[k]]
        left[lab] += 1.0
        right[lab] -= 1.0
        v = x[order[k]]
        if v != x[order[k + 1]]:
            nl = k + 1
            nr = n - nl
            thr[m] = v
            red[m] = (g_parent
                      - (nl / n) * gini_from_counts(left, nl)
                      - (nr / n) * gini_from_counts(right, nr))
            m += 1
    return thr[:m], red[:m]


@njit(cache=True)
def reg_scan_ordered(x, y, order, weighted):
    """MSE reduction for every candidate threshold of one column.

    Sums are accumulated on targets centred at the node mean, with separate
    prefix and suffix passes so neither side is obtained by subtraction.
    """
    n = order.shape[0]
    mean = 0.0
    for i in range(n):
        mean += y[order[i]]
    mean /= n
    z = np.empty(n)
    for k in range(n):
        z[k] = y[order[k]] - mean
    # suffix sums: suf_s[k] = sum z[k:], same for squares
    suf_s = np.zeros(n + 1)
    suf_q = np.zeros(n + 1)
    for k in range(n - 1, -1, -1):
        suf_s[k] = suf_s[k + 1] + z[k]
        suf_q[k] = suf_q[k + 1] + z[k] * z[k]
    parent = suf_q[0] / n - (suf_s[0] / n) ** 2
    if parent < 0.0:
        parent = 0.0
    thr = np.empty(n)
    red = np.empty(n)
    m = 0
    ls = 0.0
    lq = 0.0
    for k in range(n - 1):
        ls += z[k]
        lq += z[k] * z[k]
        v = x[order[k]]
        if v != x[order[k + 1]]:
            nl = k + 1
            nr = n - nl
            mse_l = lq / nl - (ls / nl) ** 2
            mse_r = suf_q[k + 1] / nr - (suf_s[k + 1] / nr) ** 2
            if mse_l < 0.0:
                mse_l = 0.0
            if mse_r < 0.0:
                mse_r = 0.0
            thr[m] = v
            if weighted:
                red[m] = parent - (nl / n) * mse_l - (nr / n) * mse_r
            else:
                red[m] = parent - mse_l - mse_r
            m += 1
    return thr[:m], red[:m]


@njit(cache=True)
def presort(X, idx):
    """Row ``j`` holds ``idx`` ordered by feature ``j``.

    Indices are stored as int32 to keep the per-node working set small.
    """
    D = X.shape[1]
    out = np.empty((D, idx.shape[0]), dtype=np.int32)
    for j in range(D):
        out[j] = sort_node(X[:, j], idx)
    return out


@njit(cache=True)
def partition_sorted(x, sorted_cols, threshold, goes_left):
    """Split every presorted row by ``x[i] <= threshold``, keeping order.

    ``goes_left`` is a per-tree scratch buffer indexed by sample id; it is
    filled for this node's samples once so the row passes read one byte
    per sample instead of the feature value.
    """
    D, n = sorted_cols.shape
    nl = 0
    for i in range(n):
        s = sorted_cols[0, i]
        flag = x[s] <= threshold
        goes_left[s] = flag
        if flag:
            nl += 1
    left = np.empty((D, nl), dtype=np.int32)
    right = np.empty((D, n - nl), dtype=np.int32)
    for j in range(D):
        a = 0
        b = 0
        for i in range(n):
            s = sorted_cols[j, i]
            if goes_left[s]:
                left[j, a] = s
                a += 1
            else:
                right[j, b] = s
                b += 1
    return left, right


@njit(cache=True)
def node_impurity_class(y, idx, n_classes):
    counts = np.zeros(n_classes)
    for i in range(idx.shape[0]):
        counts[y[idx[i]]] += 1.0
    return gini_from_counts(counts, idx.shape[0])


@njit(cache=True)
def node_impurity_reg(y, idx):
    n = idx.shape[0]
    mean = 0.0
    for i in range(n):
        mean += y[idx[i]]
    mean /= n
    s = 0.0
    for i in range(n):
        d = y[idx[i]] - mean
        s += d * d
    return s / n


@njit(cache=True)
def first_near_max(red, tol):
    """Index of the first entry within ``tol`` of the maximum.

    Exact ties can round apart in floating point; this keeps the lowest
    index among them.
    """
    top = red.max()
    for i in range(red.shape[0]):
        if red[i] >= top - tol:
            return i
    return 0


@njit(cache=True)
def best_per_feature_class(X, y, orders, feats, n_classes, tol):
    """Best reduction and its threshold for each listed feature.

    ``orders[i]`` is the node's samples sorted by feature ``feats[i]``;
    ``valid[i]`` is False when that feature is constant on the node.
    """
    nf = feats.shape[0]
    best = np.full(nf, -np.inf)
    best_thr = np.full(nf, np.nan)
    valid = np.zeros(nf, dtype=np.bool_)
    for i in range(nf):
        thr, red = class_scan_ordered(X[:, feats[i]], y, orders[i], n_classes)
        if thr.shape[0] > 0:
            a = first_near_max(red, tol)
            best[i] = red[a]
            best_thr[i] = thr[a]
            valid[i] = True
    return best, best_thr, valid


@njit(cache=True)
def best_per_feature_reg(X, y, orders, feats, weighted, tol):
    nf = feats.shape[0]
    best = np.full(nf, -np.inf)
    best_thr = np.full(nf, np.nan)
    valid = np.zeros(nf, dtype=np.bool_)
    for i in range(nf):
        thr, red = reg_scan_ordered(X[:, feats[i]], y, orders[i], weighted)
        if thr.shape[0] > 0:
            a = first_near_max(red, tol)
            best[i] = red[a]
            best_thr[i] = thr[a]
            valid[i] = True
    return best, best_thr, valid


@njit(cache=True)
def orders_for(X, idx, feats):
    out = np.empty((feats.shape[0], idx.shape[0]), dtype=np.int32)
    for i in range(feats.shape[0]):
        out[i] = sort_node(X[:, feats[i]], idx)
    return out


@njit(cache=True)
def apply_tree(feature, threshold, left, right, X):
    """Leaf id reached by every row of ``X``."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
