"""User-based k-NN rating predictors and their similarity matrices."""

from __future__ import annotations

import numpy as np

from .base import TrainedModel
from .baselines import fit_baselines


def _dense_matrices(n_rows, n_cols, rows, cols, ratings):
    R = np.zeros((n_rows, n_cols))
    M = np.zeros((n_rows, n_cols))
    R[rows, cols] = ratings
    M[rows, cols] = 1.0
    return R, M


def similarity_matrix(train, kind: str = "msd", min_support: int = 1,
                      user_based: bool = True) -> np.ndarray:
    """Symmetric pairwise similarities over co-rated items (or users).

    msd: 1 / (mean squared difference + 1); cosine and pearson are computed
    on the co-rated subset only.  Pairs with fewer than ``min_support``
    co-ratings get similarity 0.
    """
    if kind not in ("msd", "cosine", "pearson"):
        raise ValueError(f"unknown similarity kind {kind!r}")
    from .base import index_ids

    uid_index, u = index_ids(train.users)
    iid_index, i = index_ids(train.items)
    if user_based:
        R, M = _dense_matrices(len(uid_index), len(iid_index), u, i, train.ratings)
    else:
        R, M = _dense_matrices(len(iid_index), len(uid_index), i, u, train.ratings)

    N = M @ M.T  # co-rating counts
    S12 = R @ R.T
    supported = N >= max(min_support, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "msd":
            sq = (R * R) @ M.T
            diff = sq + sq.T - 2.0 * S12
            msd = np.where(N > 0, diff / np.maximum(N, 1), 0.0)
            sim = 1.0 / (msd + 1.0)
        elif kind == "cosine":
            s11 = (R * R) @ M.T
            denom = np.sqrt(s11 * s11.T)
            sim = np.where(denom > 0, S12 / np.maximum(denom, 1e-300), 0.0)
        else:  # pearson over the co-rated subset
            S1 = R @ M.T
            s11 = (R * R) @ M.T
            cov = N * S12 - S1 * S1.T
            var1 = N * s11 - S1 ** 2
            var2 = var1.T
            denom = np.sqrt(np.maximum(var1 * var2, 0.0))
            sim = np.where(denom > 0, cov / np.maximum(denom, 1e-300), 0.0)
    sim = np.where(supported, sim, 0.0)
    return sim


def _per_item_raters(i, u, ratings, n_items):
    """item index -> (rater indices, their ratings) as flat arrays + offsets."""
    order = np.argsort(i, kind="stable")
    sorted_items = i[order]
    offsets = np.searchsorted(sorted_items, np.arange(n_items + 1))
    return u[order], ratings[order], offsets


class _KNNModel(TrainedModel):
    """Common state: similarity matrix and per-item rater lists."""

    def _fit(self, train, features):
        p = self.spec.params
        self.k = p["k"]
        self.min_k = p["min_k"]
        self.sim = similarity_matrix(
            train, kind=p["similarity"], min_support=p["min_support"], user_based=True
        )
        self._raters_u, self._raters_r, self._rater_offsets = _per_item_raters(
            self._i, self._u, train.ratings, self.n_items
        )
        self._fit_extra(train)

    def _fit_extra(self, train):
        pass

    def _neighbors(self, uidx, iidx):
        """Top-k positive-similarity raters of the item: (sims, ratings)."""
        lo, hi = self._rater_offsets[iidx], self._rater_offsets[iidx + 1]
        cand_u = self._raters_u[lo:hi]
        cand_r = self._raters_r[lo:hi]
        sims = self.sim[uidx, cand_u]
        if len(sims) > self.k:
            top = np.argpartition(-sims, self.k - 1)[: self.k]
            sims, cand_r, cand_u = sims[top], cand_r[top], cand_u[top]
        pos = sims > 0
        return sims[pos], cand_r[pos], cand_u[pos]


class KNNBasic(_KNNModel):
    """Similarity-weighted mean of neighbour ratings."""

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        if uidx < 0 or iidx < 0:
            return self.global_mean
        sims, ratings, _ = self._neighbors(uidx, iidx)
        if len(sims) < self.min_k:
            return self.global_mean
        return float(np.dot(sims, ratings) / sims.sum())


class KNNWithMeans(_KNNModel):
    """User mean plus similarity-weighted neighbour deviations."""

    def _fit_extra(self, train):
        counts = np.bincount(self._u, minlength=self.n_users).astype(np.float64)
        self.user_means = np.bincount(self._u, weights=train.ratings, minlength=self.n_users) / counts

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        if uidx < 0:
            return self.global_mean
        est = self.user_means[uidx]
        if iidx < 0:
            return est
        sims, ratings, neighbors = self._neighbors(uidx, iidx)
        if len(sims) >= self.min_k and sims.sum() > 0:
            est += float(np.dot(sims, ratings - self.user_means[neighbors]) / sims.sum())
        return est


class KNNBaseline(_KNNModel):
    """ALS baseline plus similarity-weighted deviations from baselines."""

    def _fit_extra(self, train):
        p = self.spec.params
        self.mu, self.bu, self.bi, _, _ = fit_baselines(
            train, reg_u=p["bsl_reg_u"], reg_i=p["bsl_reg_i"], epochs=p["bsl_epochs"]
        )

    def _baseline(self, uidx, iidx):
        est = self.mu
        if uidx >= 0:
            est += self.bu[uidx]
        if iidx >= 0:
            est += self.bi[iidx]
        return est

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        est = self._baseline(uidx, iidx)
        if uidx < 0 or iidx < 0:
            return est
        sims, ratings, neighbors = self._neighbors(uidx, iidx)
        if len(sims) >= self.min_k and sims.sum() > 0:
            neighbor_bsl = self.mu + self.bu[neighbors] + self.bi[iidx]
            est += float(np.dot(sims, ratings - neighbor_bsl) / sims.sum())
        return est
