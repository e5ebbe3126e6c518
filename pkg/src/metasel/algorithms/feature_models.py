"""Feature-driven predictors: ridge-stabilized least squares and boosted trees."""

from __future__ import annotations

import numpy as np

from .base import TrainedModel
from .gbt import fit_gbt


class LinearRegression(TrainedModel):
    """OLS via normal equations with a tiny ridge for rank safety
    (one-hot blocks make X'X singular)."""

    feature_kind = "base"

    def _fit(self, train, features):
        eps = self.spec.params["ridge"]
        X = np.hstack([features, np.ones((len(features), 1))])
        gram = X.T @ X
        gram[np.diag_indices_from(gram)] += eps
        self.weights = np.linalg.solve(gram, X.T @ train.ratings)

    def _raw(self, rows: np.ndarray) -> np.ndarray:
        return rows @ self.weights[:-1] + self.weights[-1]

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        return float(self._raw(np.asarray(feature_row, dtype=np.float64)))

    def _estimate_many(self, uidx, iidx, features, indices):
        return self._raw(features)


class LinearRegressionEF(LinearRegression):
    feature_kind = "extended"


class GradientBoosting(TrainedModel):
    """Squared-loss GBDT on the encoded feature matrix."""

    feature_kind = "base"

    def _fit(self, train, features):
        p = self.spec.params
        self.ensemble = fit_gbt(
            features, train.ratings,
            trees=p["trees"], depth=p["depth"], lr=p["lr"],
            min_leaf=p["min_leaf"], seed=self.spec.seed,
        )

    def _estimate(self, uidx, iidx, feature_row, instance_index):
        return float(self.ensemble.predict(np.asarray(feature_row, dtype=np.float64))[0])

    def _estimate_many(self, uidx, iidx, features, indices):
        return self.ensemble.predict(features)


class GradientBoostingEF(GradientBoosting):
    feature_kind = "extended"
