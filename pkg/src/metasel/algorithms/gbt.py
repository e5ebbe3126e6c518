"""Gradient-boosted regression trees: squared loss, level-wise growth,
exact greedy splits over sorted feature values.

Trees use heap indexing (children of node n are 2n+1 / 2n+2), so a depth-d
tree lives in flat arrays of length 2^(d+1) - 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

_MIN_GAIN = 1e-12


@njit(cache=True)
def _build_tree(X, order, resid, depth, min_leaf, feature, threshold, value):
    """Fit one regression tree to residuals; returns per-sample leaf ids."""
    n, d = X.shape
    max_nodes = len(feature)
    node_of = np.zeros(n, dtype=np.int64)
    cnt = np.zeros(max_nodes)
    tot = np.zeros(max_nodes)
    best_gain = np.zeros(max_nodes)
    best_feat = np.zeros(max_nodes, dtype=np.int64)
    best_thr = np.zeros(max_nodes)
    scan_cnt = np.zeros(max_nodes)
    scan_sum = np.zeros(max_nodes)
    prev_x = np.zeros(max_nodes)

    for level in range(depth):
        lo_nd = (1 << level) - 1
        hi_nd = (1 << (level + 1)) - 1
        any_active = False
        for nd in range(lo_nd, hi_nd):
            cnt[nd] = 0.0
            tot[nd] = 0.0
            best_gain[nd] = _MIN_GAIN
            best_feat[nd] = -1
        for s in range(n):
            nd = node_of[s]
            if nd >= lo_nd:
                cnt[nd] += 1.0
                tot[nd] += resid[s]
                any_active = True
        if not any_active:
            break

        for j in range(d):
            for nd in range(lo_nd, hi_nd):
                scan_cnt[nd] = 0.0
                scan_sum[nd] = 0.0
            for pos in range(n):
                s = order[pos, j]
                nd = node_of[s]
                if nd < lo_nd:
                    continue
                x = X[s, j]
                sc = scan_cnt[nd]
                if sc > 0.0 and x > prev_x[nd]:
                    nl = sc
                    nr = cnt[nd] - sc
                    if nl >= min_leaf and nr >= min_leaf:
                        sl = scan_sum[nd]
                        sr = tot[nd] - sl
                        gain = sl * sl / nl + sr * sr / nr - tot[nd] * tot[nd] / cnt[nd]
                        if gain > best_gain[nd]:
                            best_gain[nd] = gain
                            best_feat[nd] = j
                            best_thr[nd] = 0.5 * (prev_x[nd] + x)
                scan_cnt[nd] = sc + 1.0
                scan_sum[nd] += resid[s]
                prev_x[nd] = x

        for nd in range(lo_nd, hi_nd):
            if cnt[nd] > 0.0:
                if best_feat[nd] >= 0:
                    feature[nd] = best_feat[nd]
                    threshold[nd] = best_thr[nd]
                else:
                    value[nd] = tot[nd] / cnt[nd]
        for s in range(n):
            nd = node_of[s]
            if nd >= lo_nd:
                if best_feat[nd] >= 0:
                    if X[s, best_feat[nd]] <= best_thr[nd]:
                        node_of[s] = 2 * nd + 1
                    else:
                        node_of[s] = 2 * nd + 2
                else:
                    node_of[s] = -1 - nd  # frozen at this leaf

    # remaining samples sit at depth-level leaves
    lo_nd = (1 << depth) - 1
    hi_nd = (1 << (depth + 1)) - 1
    for nd in range(lo_nd, hi_nd):
        cnt[nd] = 0.0
        tot[nd] = 0.0
    for s in range(n):
        nd = node_of[s]
        if nd >= lo_nd:
            cnt[nd] += 1.0
            tot[nd] += resid[s]
    for nd in range(lo_nd, hi_nd):
        if cnt[nd] > 0.0:
            value[nd] = tot[nd] / cnt[nd]

    leaf_of = np.empty(n, dtype=np.int64)
    for s in range(n):
        nd = node_of[s]
        leaf_of[s] = nd if nd >= 0 else -1 - nd
    return leaf_of


@njit(cache=True)
def _predict_trees(X, features, thresholds, values, base_score, lr):
    n = X.shape[0]
    n_trees = features.shape[0]
    out = np.full(n, base_score)
    for s in range(n):
        acc = 0.0
        for t in range(n_trees):
            nd = 0
            while features[t, nd] >= 0:
                if X[s, features[t, nd]] <= thresholds[t, nd]:
                    nd = 2 * nd + 1
                else:
                    nd = 2 * nd + 2
            acc += values[t, nd]
        out[s] += lr * acc
    return out


@dataclass
class TreeEnsemble:
    base_score: float
    lr: float
    features: np.ndarray    # (n_trees, max_nodes), -1 marks a leaf
    thresholds: np.ndarray
    values: np.ndarray
    train_mse: np.ndarray   # per boosting round, on the training set

    @property
    def n_trees(self) -> int:
        return self.features.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        if self.n_trees == 0:
            return np.full(X.shape[0], self.base_score)
        return _predict_trees(
            X, self.features, self.thresholds, self.values, self.base_score, self.lr
        )


def fit_gbt(features: np.ndarray, targets: np.ndarray, trees: int = 100,
            depth: int = 6, lr: float = 0.1, min_leaf: int = 20,
            seed: int = 0) -> TreeEnsemble:
    """Boosted depth-limited regression trees on residuals.

    Degenerate inputs (fewer than 2*min_leaf rows) give a constant predictor.
    The split search is exact and deterministic; ``seed`` is accepted for
    interface symmetry with the stochastic models.
    """
    if trees < 1 or depth < 1:
        raise ValueError("trees and depth must both be >= 1")
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    n = len(y)
    base = float(y.mean())
    max_nodes = (1 << (depth + 1)) - 1
    if n < 2 * min_leaf:
        empty = np.zeros((0, max_nodes))
        return TreeEnsemble(base, lr, np.zeros((0, max_nodes), dtype=np.int64),
                            empty, empty.copy(), np.array([float(np.mean((y - base) ** 2))]))

    order = np.argsort(X, axis=0, kind="stable").astype(np.int64)
    feat_arr = np.full((trees, max_nodes), -1, dtype=np.int64)
    thr_arr = np.zeros((trees, max_nodes))
    val_arr = np.zeros((trees, max_nodes))
    mse = np.empty(trees)

    pred = np.full(n, base)
    for t in range(trees):
        resid = y - pred
        leaf_of = _build_tree(
            X, order, resid, depth, float(min_leaf),
            feat_arr[t], thr_arr[t], val_arr[t],
        )
        pred += lr * val_arr[t][leaf_of]
        mse[t] = float(np.mean((y - pred) ** 2))

    return TreeEnsemble(base, lr, feat_arr, thr_arr, val_arr, mse)
