"""Co-clustering recommender: alternating user/item cluster assignment with
prediction from co-cluster, user-cluster, and item-cluster averages."""

from __future__ import annotations

import numpy as np

from .base import TrainedModel


class CoClustering(TrainedModel):
    """r_hat = cocluster avg + (user mean - user-cluster avg)
                             + (item mean - item-cluster avg)."""

    def _fit(self, train, features):
        p = self.spec.params
        ku, ki = p["n_cltr_u"], p["n_cltr_i"]
        epochs = p["n_epochs"]
        rng = np.random.default_rng(self.spec.seed)
        u, i, r = self._u, self._i, train.ratings
        mu = self.global_mean

        count_u = np.bincount(u, minlength=self.n_users).astype(np.float64)
        count_i = np.bincount(i, minlength=self.n_items).astype(np.float64)
        self.user_means = np.bincount(u, weights=r, minlength=self.n_users) / count_u
        self.item_means = np.bincount(i, weights=r, minlength=self.n_items) / count_i

        cltr_u = rng.integers(0, ku, size=self.n_users)
        cltr_i = rng.integers(0, ki, size=self.n_items)

        # Residual after removing both marginal means; cluster structure models it.
        x = r - self.user_means[u] - self.item_means[i]
        sq_const_u = np.bincount(u, weights=x * x, minlength=self.n_users)
        sq_const_i = np.bincount(i, weights=x * x, minlength=self.n_items)

        for _ in range(epochs):
            uc_avg, ic_avg, coc_avg = self._averages(u, i, r, cltr_u, cltr_i, ku, ki, mu)
            # B[g, h]: modelled residual for a rating in co-cluster (g, h)
            B = coc_avg - uc_avg[:, None] - ic_avg[None, :]
            cltr_u = self._assign(u, i, x, cltr_i, B, ku, self.n_users, sq_const_u)
            cltr_i = self._assign(i, u, x, cltr_u, B.T, ki, self.n_items, sq_const_i)

        self.cltr_u = cltr_u
        self.cltr_i = cltr_i
        self.uc_avg, self.ic_avg, self.coc_avg = self._averages(
            u, i, r, cltr_u, cltr_i, ku, ki, mu
        )

    @staticmethod
    def _averages(u, i, r, cltr_u, cltr_i, ku, ki, mu):
        gu = cltr_u[u]
        hi = cltr_i[i]
        uc_cnt = np.bincount(gu, minlength=ku).astype(np.float64)
        ic_cnt = np.bincount(hi, minlength=ki).astype(np.float64)
        uc_avg = np.where(uc_cnt > 0, np.bincount(gu, weights=r, minlength=ku) / np.maximum(uc_cnt, 1), mu)
        ic_avg = np.where(ic_cnt > 0, np.bincount(hi, weights=r, minlength=ki) / np.maximum(ic_cnt, 1), mu)
        key = gu * ki + hi
        coc_cnt = np.bincount(key, minlength=ku * ki).astype(np.float64)
        coc_sum = np.bincount(key, weights=r, minlength=ku * ki)
        coc_avg = np.where(coc_cnt > 0, coc_sum / np.maximum(coc_cnt, 1), mu).reshape(ku, ki)
        return uc_avg, ic_avg, coc_avg

    @staticmethod
    def _assign(rows, cols, x, col_clusters, B, k_rows, n_rows, sq_const):
        """Reassign each row entity to the cluster minimizing squared error."""
        k_cols = B.shape[1]
        key = rows * k_cols + col_clusters[cols]
        s1 = np.bincount(key, weights=x, minlength=n_rows * k_cols).reshape(n_rows, k_cols)
        s0 = np.bincount(key, minlength=n_rows * k_cols).reshape(n_rows, k_cols).astype(np.float64)
        # cost(row, g) = sq_const - 2 <s1, B[g]> + <s0, B[g]^2>
        costs = -2.0 * s1 @ B.T + s0 @ (B.T ** 2)
        return np.argmin(costs, axis=1)

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        if uidx >= 0 and iidx >= 0:
            g, h = self.cltr_u[uidx], self.cltr_i[iidx]
            return float(
                self.coc_avg[g, h]
                + self.user_means[uidx] - self.uc_avg[g]
                + self.item_means[iidx] - self.ic_avg[h]
            )
        if uidx >= 0:
            return float(self.user_means[uidx])
        if iidx >= 0:
            return float(self.item_means[iidx])
        return self.global_mean

    def _estimate_many(self, uidx, iidx, features, indices):
        est = np.full(len(uidx), self.global_mean)
        only_u = (uidx >= 0) & (iidx < 0)
        only_i = (uidx < 0) & (iidx >= 0)
        both = (uidx >= 0) & (iidx >= 0)
        est[only_u] = self.user_means[uidx[only_u]]
        est[only_i] = self.item_means[iidx[only_i]]
        g = self.cltr_u[uidx[both]]
        h = self.cltr_i[iidx[both]]
        est[both] = (
            self.coc_avg[g, h]
            + self.user_means[uidx[both]] - self.uc_avg[g]
            + self.item_means[iidx[both]] - self.ic_avg[h]
        )
        return est
