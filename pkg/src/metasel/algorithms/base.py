"""Shared fit/predict contract for the rating-predictor pool.

Every model clamps its raw score to the rating scale and falls back for
cold-start queries: unknown user and item give the global mean; a single
unknown side keeps whatever bias the model has for the known side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


class HyperparameterError(ValueError):
    """Hyperparameters do not fit the algorithm's schema."""


class PredictionError(ValueError):
    """A query could not be answered (for example a missing feature row)."""


@dataclass
class AlgorithmSpec:
    id: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0


@dataclass
class PredictionQuery:
    user_id: int
    item_id: int
    feature_row: np.ndarray | None = None
    known_user: bool = True
    known_item: bool = True
    instance_index: int = 0


@dataclass
class QueryBatch:
    """Column-oriented queries; feature matrices indexed per model kind."""

    users: np.ndarray
    items: np.ndarray
    indices: np.ndarray
    features_base: np.ndarray | None = None
    features_ext: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.users)

    def features_for(self, kind: str | None) -> np.ndarray | None:
        if kind is None:
            return None
        table = self.features_base if kind == "base" else self.features_ext
        if table is None:
            raise PredictionError(f"query batch has no {kind!r} feature matrix")
        return table


def index_ids(values: np.ndarray) -> tuple[dict[int, int], np.ndarray]:
    """Map raw ids to contiguous indices, keeping first-seen order."""
    mapping: dict[int, int] = {}
    idx = np.empty(len(values), dtype=np.int64)
    for pos, raw in enumerate(values):
        raw = int(raw)
        if raw not in mapping:
            mapping[raw] = len(mapping)
        idx[pos] = mapping[raw]
    return mapping, idx


class TrainedModel:
    """Base class: id indexing, clamping, and the cold-start hierarchy."""

    feature_kind: str | None = None  # None, "base", or "extended"

    def __init__(self, spec: AlgorithmSpec):
        self.spec = spec
        self.scale: tuple[float, float] = (1.0, 5.0)
        self.global_mean: float = 0.0
        self.uid_index: dict[int, int] = {}
        self.iid_index: dict[int, int] = {}

    # -- fitting -----------------------------------------------------------

    def fit(self, train, features: np.ndarray | None = None) -> "TrainedModel":
        if train.n == 0:
            raise ValueError("cannot fit on an empty rating table")
        self.scale = train.scale
        self.global_mean = float(train.ratings.mean())
        self.uid_index, self._u = index_ids(train.users)
        self.iid_index, self._i = index_ids(train.items)
        self.n_users = len(self.uid_index)
        self.n_items = len(self.iid_index)
        if self.feature_kind is not None:
            if features is None:
                raise PredictionError(f"{self.spec.id} requires a feature matrix to fit")
            features = np.asarray(features, dtype=np.float64)
            if len(features) != train.n:
                raise ValueError("feature matrix not aligned with rating table")
        elif features is not None:
            raise PredictionError(f"{self.spec.id} does not take features")
        self._fit(train, features)
        return self

    def _fit(self, train, features):
        raise NotImplementedError

    # -- prediction --------------------------------------------------------

    def clamp(self, value: float) -> float:
        lo, hi = self.scale
        return float(min(max(value, lo), hi))

    def predict(self, q: PredictionQuery) -> float:
        if self.feature_kind is not None and q.feature_row is None:
            raise PredictionError(f"{self.spec.id} prediction requires a feature row")
        uidx = self.uid_index.get(int(q.user_id), -1)
        iidx = self.iid_index.get(int(q.item_id), -1)
        raw = self._estimate(uidx, iidx, q.feature_row, int(q.instance_index))
        return self.clamp(raw)

    def _estimate(self, uidx: int, iidx: int, feature_row, instance_index: int) -> float:
        raise NotImplementedError

    def predict_many(self, batch: QueryBatch) -> np.ndarray:
        """Vectorized where the subclass provides it, else a plain loop."""
        features = batch.features_for(self.feature_kind)
        uidx = np.array([self.uid_index.get(int(u), -1) for u in batch.users], dtype=np.int64)
        iidx = np.array([self.iid_index.get(int(i), -1) for i in batch.items], dtype=np.int64)
        raw = self._estimate_many(uidx, iidx, features, batch.indices)
        lo, hi = self.scale
        return np.clip(raw, lo, hi)

    def _estimate_many(self, uidx, iidx, features, indices) -> np.ndarray:
        out = np.empty(len(uidx))
        for k in range(len(uidx)):
            row = None if features is None else features[k]
            out[k] = self._estimate(int(uidx[k]), int(iidx[k]), row, int(indices[k]))
        return out
