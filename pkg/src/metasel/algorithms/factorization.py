"""SGD matrix factorization: biased SVD, SVD++ with implicit feedback, and
non-negative factorization with multiplicative updates."""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import TrainedModel


def svd_sample_gradients(mu, bu, bi, pu, qi, rating, reg):
    """Analytic gradients of the per-sample objective
    L = 0.5 * err^2 + 0.5 * reg * (bu^2 + bi^2 + |pu|^2 + |qi|^2)
    with err = rating - (mu + bu + bi + pu . qi).

    The SGD kernel's update step is exactly -lr times these gradients.
    Returns (g_bu, g_bi, g_pu, g_qi).
    """
    err = rating - (mu + bu + bi + float(np.dot(pu, qi)))
    g_bu = -err + reg * bu
    g_bi = -err + reg * bi
    g_pu = -err * qi + reg * pu
    g_qi = -err * pu + reg * qi
    return g_bu, g_bi, g_pu, g_qi


@njit(cache=True)
def _svd_sgd(u, i, r, mu, bu, bi, P, Q, n_epochs, lr, reg, objective):
    n = len(r)
    f = P.shape[1]
    for epoch in range(n_epochs):
        for k in range(n):
            uu = u[k]
            ii = i[k]
            dot = 0.0
            for j in range(f):
                dot += P[uu, j] * Q[ii, j]
            err = r[k] - (mu + bu[uu] + bi[ii] + dot)
            bu[uu] += lr * (err - reg * bu[uu])
            bi[ii] += lr * (err - reg * bi[ii])
            for j in range(f):
                puj = P[uu, j]
                qij = Q[ii, j]
                P[uu, j] += lr * (err * qij - reg * puj)
                Q[ii, j] += lr * (err * puj - reg * qij)
        # regularized objective the SGD descends, summed over samples
        total = 0.0
        for k in range(n):
            uu = u[k]
            ii = i[k]
            dot = 0.0
            norms = bu[uu] * bu[uu] + bi[ii] * bi[ii]
            for j in range(f):
                dot += P[uu, j] * Q[ii, j]
                norms += P[uu, j] * P[uu, j] + Q[ii, j] * Q[ii, j]
            err = r[k] - (mu + bu[uu] + bi[ii] + dot)
            total += 0.5 * err * err + 0.5 * reg * norms
        objective[epoch] = total


class SVD(TrainedModel):
    """Biased SGD factorization: mu + b_u + b_i + p_u . q_i."""

    def _fit(self, train, features):
        p = self.spec.params
        f = p["n_factors"]
        rng = np.random.default_rng(self.spec.seed)
        self.bu = np.zeros(self.n_users)
        self.bi = np.zeros(self.n_items)
        self.P = rng.normal(0.0, p["init_std"], (self.n_users, f))
        self.Q = rng.normal(0.0, p["init_std"], (self.n_items, f))
        self.objective_history = np.zeros(p["n_epochs"])
        _svd_sgd(
            self._u, self._i, train.ratings, self.global_mean,
            self.bu, self.bi, self.P, self.Q,
            p["n_epochs"], p["lr"], p["reg"], self.objective_history,
        )

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        est = self.global_mean
        if uidx >= 0:
            est += self.bu[uidx]
        if iidx >= 0:
            est += self.bi[iidx]
        if uidx >= 0 and iidx >= 0:
            est += float(np.dot(self.P[uidx], self.Q[iidx]))
        return est

    def _estimate_many(self, uidx, iidx, features, indices):
        est = np.full(len(uidx), self.global_mean)
        ku = uidx >= 0
        ki = iidx >= 0
        est[ku] += self.bu[uidx[ku]]
        est[ki] += self.bi[iidx[ki]]
        both = ku & ki
        est[both] += np.einsum("ij,ij->i", self.P[uidx[both]], self.Q[iidx[both]])
        return est


@njit(cache=True)
def _svdpp_sgd(u, i, r, mu, bu, bi, P, Q, Y, items_flat, offsets,
               n_epochs, lr, reg):
    n = len(r)
    f = P.shape[1]
    u_impl = np.zeros(f)
    q_old = np.zeros(f)
    for _ in range(n_epochs):
        for k in range(n):
            uu = u[k]
            ii = i[k]
            lo = offsets[uu]
            hi = offsets[uu + 1]
            inv_sqrt = 1.0 / np.sqrt(hi - lo)
            for j in range(f):
                u_impl[j] = 0.0
            for idx in range(lo, hi):
                jj = items_flat[idx]
                for j in range(f):
                    u_impl[j] += Y[jj, j]
            for j in range(f):
                u_impl[j] *= inv_sqrt
            dot = 0.0
            for j in range(f):
                dot += Q[ii, j] * (P[uu, j] + u_impl[j])
            err = r[k] - (mu + bu[uu] + bi[ii] + dot)
            bu[uu] += lr * (err - reg * bu[uu])
            bi[ii] += lr * (err - reg * bi[ii])
            for j in range(f):
                puj = P[uu, j]
                qij = Q[ii, j]
                q_old[j] = qij
                P[uu, j] += lr * (err * qij - reg * puj)
                Q[ii, j] += lr * (err * (puj + u_impl[j]) - reg * qij)
            # implicit factors move along the pre-update q_i direction
            for idx in range(lo, hi):
                jj = items_flat[idx]
                for j in range(f):
                    Y[jj, j] += lr * (err * q_old[j] * inv_sqrt - reg * Y[jj, j])


class SVDpp(TrainedModel):
    """SVD with implicit feedback: q_i . (p_u + |I_u|^{-1/2} sum_j y_j)."""

    def _fit(self, train, features):
        p = self.spec.params
        f = p["n_factors"]
        rng = np.random.default_rng(self.spec.seed)
        self.bu = np.zeros(self.n_users)
        self.bi = np.zeros(self.n_items)
        self.P = rng.normal(0.0, p["init_std"], (self.n_users, f))
        self.Q = rng.normal(0.0, p["init_std"], (self.n_items, f))
        self.Y = rng.normal(0.0, p["init_std"], (self.n_items, f))
        order = np.argsort(self._u, kind="stable")
        items_flat = self._i[order]
        offsets = np.searchsorted(self._u[order], np.arange(self.n_users + 1))
        _svdpp_sgd(
            self._u, self._i, train.ratings, self.global_mean,
            self.bu, self.bi, self.P, self.Q, self.Y,
            items_flat, offsets, p["n_epochs"], p["lr"], p["reg"],
        )
        # final per-user implicit profile, for prediction
        counts = np.diff(offsets).astype(np.float64)
        self.U_impl = np.add.reduceat(
            self.Y[items_flat], offsets[:-1]
        ) / np.sqrt(counts)[:, None]

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        est = self.global_mean
        if uidx >= 0:
            est += self.bu[uidx]
        if iidx >= 0:
            est += self.bi[iidx]
        if uidx >= 0 and iidx >= 0:
            est += float(np.dot(self.Q[iidx], self.P[uidx] + self.U_impl[uidx]))
        return est

    def _estimate_many(self, uidx, iidx, features, indices):
        est = np.full(len(uidx), self.global_mean)
        ku = uidx >= 0
        ki = iidx >= 0
        est[ku] += self.bu[uidx[ku]]
        est[ki] += self.bi[iidx[ki]]
        both = ku & ki
        est[both] += np.einsum(
            "ij,ij->i",
            self.Q[iidx[both]],
            self.P[uidx[both]] + self.U_impl[uidx[both]],
        )
        return est


@njit(cache=True)
def _nmf_epoch(u, i, r, P, Q, reg_pu, reg_qi, count_u, count_i,
               user_num, user_denom, item_num, item_denom):
    n = len(r)
    f = P.shape[1]
    user_num[:] = 0.0
    user_denom[:] = 0.0
    item_num[:] = 0.0
    item_denom[:] = 0.0
    for k in range(n):
        uu = u[k]
        ii = i[k]
        est = 0.0
        for j in range(f):
            est += P[uu, j] * Q[ii, j]
        for j in range(f):
            user_num[uu, j] += Q[ii, j] * r[k]
            user_denom[uu, j] += Q[ii, j] * est
            item_num[ii, j] += P[uu, j] * r[k]
            item_denom[ii, j] += P[uu, j] * est
    for uu in range(P.shape[0]):
        for j in range(f):
            denom = user_denom[uu, j] + count_u[uu] * reg_pu * P[uu, j]
            if denom > 0.0:
                P[uu, j] *= user_num[uu, j] / denom
    for ii in range(Q.shape[0]):
        for j in range(f):
            denom = item_denom[ii, j] + count_i[ii] * reg_qi * Q[ii, j]
            if denom > 0.0:
                Q[ii, j] *= item_num[ii, j] / denom


class NMF(TrainedModel):
    """Non-negative factorization via multiplicative updates (no biases)."""

    def _fit(self, train, features):
        p = self.spec.params
        f = p["n_factors"]
        rng = np.random.default_rng(self.spec.seed)
        self.P = rng.uniform(p["init_low"], p["init_high"], (self.n_users, f))
        self.Q = rng.uniform(p["init_low"], p["init_high"], (self.n_items, f))
        count_u = np.bincount(self._u, minlength=self.n_users).astype(np.float64)
        count_i = np.bincount(self._i, minlength=self.n_items).astype(np.float64)
        user_num = np.zeros_like(self.P)
        user_denom = np.zeros_like(self.P)
        item_num = np.zeros_like(self.Q)
        item_denom = np.zeros_like(self.Q)
        for _ in range(p["n_epochs"]):
            _nmf_epoch(
                self._u, self._i, train.ratings, self.P, self.Q,
                p["reg_pu"], p["reg_qi"], count_u, count_i,
                user_num, user_denom, item_num, item_denom,
            )

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        if uidx >= 0 and iidx >= 0:
            return float(np.dot(self.P[uidx], self.Q[iidx]))
        return self.global_mean

    def _estimate_many(self, uidx, iidx, features, indices):
        est = np.full(len(uidx), self.global_mean)
        both = (uidx >= 0) & (iidx >= 0)
        est[both] = np.einsum("ij,ij->i", self.P[uidx[both]], self.Q[iidx[both]])
        return est
