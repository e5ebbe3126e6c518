"""Random-normal and bias-only baselines."""

from __future__ import annotations

import numpy as np

from .base import TrainedModel


class NormalPredictor(TrainedModel):
    """Draws ratings from a normal fit to the training distribution (MLE).

    Each draw is keyed by (model seed, instance index) so repeated queries
    and reruns see the same value.
    """

    def _fit(self, train, features):
        self.mu = float(train.ratings.mean())
        self.sigma = float(train.ratings.std())  # population MLE

    def raw_draw(self, instance_index: int) -> float:
        rng = np.random.default_rng([self.spec.seed & 0x7FFFFFFF, int(instance_index)])
        return float(rng.normal(self.mu, self.sigma))

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        return self.raw_draw(instance_index)

    def _estimate_many(self, uidx, iidx, features, indices):
        return np.array([self.raw_draw(int(ix)) for ix in indices])


def fit_baselines(train, reg_u: float = 15.0, reg_i: float = 10.0, epochs: int = 10):
    """Alternating least squares for user/item rating biases.

    Starting from zeros, each epoch sets item biases from current user
    biases, b_i = sum_{u in R(i)} (r_ui - mu - b_u) / (reg_i + |R(i)|),
    then user biases symmetrically.

    Returns (mu, bu, bi, uid_index, iid_index) with biases as dense arrays.
    """
    if epochs < 1:
        raise ValueError("baseline ALS needs at least one epoch")
    from .base import index_ids

    uid_index, u = index_ids(train.users)
    iid_index, i = index_ids(train.items)
    r = train.ratings
    mu = float(r.mean())
    n_users, n_items = len(uid_index), len(iid_index)
    bu = np.zeros(n_users)
    bi = np.zeros(n_items)
    count_u = np.bincount(u, minlength=n_users).astype(np.float64)
    count_i = np.bincount(i, minlength=n_items).astype(np.float64)
    for _ in range(epochs):
        bi = np.bincount(i, weights=r - mu - bu[u], minlength=n_items) / (reg_i + count_i)
        bu = np.bincount(u, weights=r - mu - bi[i], minlength=n_users) / (reg_u + count_u)
    return mu, bu, bi, uid_index, iid_index


class BaselineOnly(TrainedModel):
    """mu + b_u + b_i with ALS-fit biases."""

    def _fit(self, train, features):
        p = self.spec.params
        mu, bu, bi, self.uid_index, self.iid_index = fit_baselines(
            train, reg_u=p["reg_u"], reg_i=p["reg_i"], epochs=p["epochs"]
        )
        self.mu = mu
        self.bu = bu
        self.bi = bi

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        est = self.mu
        if uidx >= 0:
            est += self.bu[uidx]
        if iidx >= 0:
            est += self.bi[iidx]
        return est

    def _estimate_many(self, uidx, iidx, features, indices):
        est = np.full(len(uidx), self.mu)
        known_u = uidx >= 0
        known_i = iidx >= 0
        est[known_u] += self.bu[uidx[known_u]]
        est[known_i] += self.bi[iidx[known_i]]
        return est
