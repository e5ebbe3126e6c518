"""Slope One: average deviation between co-rated item pairs."""

from __future__ import annotations

import numpy as np

from .base import TrainedModel
from .neighbors import _dense_matrices


class SlopeOne(TrainedModel):
    """est(u, i) = user mean + mean of dev(i, j) over items j rated by u
    that share at least one rater with i, where
    dev(i, j) = sum_{u in U_ij} (r_ui - r_uj) / |U_ij|.
    """

    def _fit(self, train, features):
        R, M = _dense_matrices(self.n_users, self.n_items, self._u, self._i, train.ratings)
        counts = M.T @ M  # co-rater counts per item pair
        sdiff = R.T @ M - M.T @ R
        with np.errstate(invalid="ignore"):
            self.dev = np.where(counts > 0, sdiff / np.maximum(counts, 1), 0.0)
        self.counts = counts
        user_counts = np.bincount(self._u, minlength=self.n_users).astype(np.float64)
        self.user_means = np.bincount(self._u, weights=train.ratings, minlength=self.n_users) / user_counts
        order = np.argsort(self._u, kind="stable")
        self._items_by_user = self._i[order]
        self._user_offsets = np.searchsorted(self._u[order], np.arange(self.n_users + 1))

    def _user_items(self, uidx):
        lo, hi = self._user_offsets[uidx], self._user_offsets[uidx + 1]
        return self._items_by_user[lo:hi]

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        if uidx < 0:
            return self.global_mean
        est = float(self.user_means[uidx])
        if iidx < 0:
            return est
        js = self._user_items(uidx)
        relevant = self.counts[iidx, js] > 0
        if relevant.any():
            est += float(self.dev[iidx, js[relevant]].mean())
        return est
