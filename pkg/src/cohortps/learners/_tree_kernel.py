"""Numba kernel for weighted CART growth and prediction.

One growth routine serves both the standalone weighted tree (weighted Gini,
rpart-style cp gate, min node weight) and forest trees (unit weights on a
bootstrap sample, feature subsampling, no cp gate): the forest is just this
kernel with different knobs, which is what makes the weighted-bootstrap
forest equivalent to running unweighted tree code inside each bootstrap.

Split acceptance uses the total-scale impurity decrease
``W_node*G_node - W_left*G_left - W_right*G_right`` compared against
``cp * W_root * G_root``, so the rule is invariant to rescaling all weights.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1
_TINY_GAIN = 1e-12


@njit(cache=True)
def _next_rand(state):
    # xorshift64*: deterministic per-node feature subsampling
    state ^= state << np.uint64(13)
    state ^= state >> np.uint64(7)
    state ^= state << np.uint64(17)
    return state


@njit(cache=True)
def _rand_below(state, bound):
    state = _next_rand(state)
    return state, np.int64(state % np.uint64(bound))


@njit(cache=True)
def grow_tree(X, y, w, mtry, min_node_weight, cp, max_depth, seed):
    """Grow one tree; returns (feature, threshold, left, right, value, n_nodes).

    feature[i] == -1 marks node i as a leaf; value[i] is the node's weighted
    exposure proportion. Children must each carry at least min_node_weight.
    """
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)

    idx = np.arange(n)
    scratch = np.empty(n, dtype=np.int64)
    feat_pool = np.empty(p, dtype=np.int64)

    w_root = 0.0
    wy_root = 0.0
    for i in range(n):
        w_root += w[i]
        wy_root += w[i] * y[i]
    q_root = wy_root / w_root
    g_root = 2.0 * q_root * (1.0 - q_root)
    min_gain = cp * w_root * g_root
    if min_gain < _TINY_GAIN * w_root:
        min_gain = _TINY_GAIN * w_root

    state = np.uint64(seed)
    if state == np.uint64(0):
        state = np.uint64(0x9E3779B97F4A7C15)

    # explicit stack of (node, lo, hi, depth)
    stack = np.empty((64 + max_depth * 2 + 4, 4), dtype=np.int64)
    n_nodes = 1
    top = 0
    stack[top, 0] = 0
    stack[top, 1] = 0
    stack[top, 2] = n
    stack[top, 3] = 0
    top += 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        depth = stack[top, 3]

        w_node = 0.0
        wy_node = 0.0
        for t in range(lo, hi):
            w_node += w[idx[t]]
            wy_node += w[idx[t]] * y[idx[t]]
        q = wy_node / w_node
        value[node] = q

        if depth >= max_depth or w_node < 2.0 * min_node_weight or q <= 0.0 or q >= 1.0:
            continue

        g_node = 2.0 * q * (1.0 - q)

        # candidate features: all of them, or an mtry-subset without replacement
        n_cand = p if mtry >= p else mtry
        for j in range(p):
            feat_pool[j] = j
        if mtry < p:
            for j in range(mtry):
                state, r = _rand_below(state, p - j)
                tmp = feat_pool[j + r]
                feat_pool[j + r] = feat_pool[j]
                feat_pool[j] = tmp

        best_gain = -1.0
        best_feat = -1
        best_thresh = 0.0
        for cj in range(n_cand):
            f = feat_pool[cj]
            m = hi - lo
            col = np.empty(m, dtype=np.float64)
            for t in range(m):
                col[t] = X[idx[lo + t], f]
            order = np.argsort(col)

            wl = 0.0
            wyl = 0.0
            for t in range(m - 1):
                row = idx[lo + order[t]]
                wl += w[row]
                wyl += w[row] * y[row]
                if col[order[t + 1]] > col[order[t]]:
                    wr = w_node - wl
                    if wl < min_node_weight or wr < min_node_weight:
                        continue
                    ql = wyl / wl
                    qr = (wy_node - wyl) / wr
                    gain = (
                        w_node * g_node
                        - wl * 2.0 * ql * (1.0 - ql)
                        - wr * 2.0 * qr * (1.0 - qr)
                    )
                    if gain > best_gain:
                        best_gain = gain
                        best_feat = f
                        best_thresh = 0.5 * (col[order[t]] + col[order[t + 1]])

        if best_feat < 0 or best_gain < min_gain:
            continue

        # stable partition: left block (x <= thresh) then right block
        n_left = 0
        for t in range(lo, hi):
            if X[idx[t], best_feat] <= best_thresh:
                scratch[n_left] = idx[t]
                n_left += 1
        n_right = 0
        for t in range(lo, hi):
            if X[idx[t], best_feat] > best_thresh:
                scratch[n_left + n_right] = idx[t]
                n_right += 1
        for t in range(hi - lo):
            idx[lo + t] = scratch[t]

        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thresh
        left[node] = lchild
        right[node] = rchild

        stack[top, 0] = rchild
        stack[top, 1] = lo + n_left
        stack[top, 2] = hi
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lchild
        stack[top, 1] = lo
        stack[top, 2] = lo + n_left
        stack[top, 3] = depth + 1
        top += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True)
def grow_forest_aggregated(cell_X, cell_y, counts_all, mtry, min_node_weight,
                           max_depth, tree_seeds):
    """Grow all trees of a forest whose bootstraps are multinomial counts
    over distinct (covariates, class) cells. Returns packed node arrays
    plus per-tree offsets."""
    n_trees, m = counts_all.shape
    p = cell_X.shape[1]
    cap_tree = 2 * m + 1
    cap = n_trees * cap_tree
    feature = np.empty(cap, dtype=np.int64)
    threshold = np.empty(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int64)
    right = np.empty(cap, dtype=np.int64)
    value = np.empty(cap, dtype=np.float64)
    offsets = np.empty(n_trees + 1, dtype=np.int64)
    offsets[0] = 0

    bx = np.empty((m, p))
    by = np.empty(m)
    bw = np.empty(m)
    pos = 0
    for t in range(n_trees):
        mm = 0
        for c in range(m):
            if counts_all[t, c] > 0:
                for j in range(p):
                    bx[mm, j] = cell_X[c, j]
                by[mm] = cell_y[c]
                bw[mm] = counts_all[t, c]
                mm += 1
        depth_cap = max_depth if max_depth < mm + 1 else mm + 1
        f, th, le, ri, va = grow_tree(
            bx[:mm], by[:mm], bw[:mm], mtry, min_node_weight, 0.0, depth_cap,
            tree_seeds[t] if tree_seeds[t] != np.uint64(0) else np.uint64(1),
        )
        for q in range(f.size):
            feature[pos + q] = f[q]
            threshold[pos + q] = th[q]
            left[pos + q] = le[q]
            right[pos + q] = ri[q]
            value[pos + q] = va[q]
        pos += f.size
        offsets[t + 1] = pos

    return (
        feature[:pos].copy(),
        threshold[:pos].copy(),
        left[:pos].copy(),
        right[:pos].copy(),
        value[:pos].copy(),
        offsets,
    )


@njit(cache=True)
def predict_tree(feature, threshold, left, right, value, X, out):
    n = X.shape[0]
    for i in range(n):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True)
def predict_forest(feature, threshold, left, right, value, offsets, X, out):
    """Mean prediction over trees packed end-to-end (tree t spans
    offsets[t]:offsets[t+1] in the node arrays)."""
    n = X.shape[0]
    n_trees = offsets.size - 1
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = base
            while feature[node] != LEAF:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node] + base
                else:
                    node = right[node] + base
            acc += value[node]
        out[i] = acc / n_trees
    return out
