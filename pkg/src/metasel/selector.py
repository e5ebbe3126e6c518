"""Cluster -> algorithm routing learned from training errors, plus the
mean-ensemble baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .algorithms.base import PredictionQuery, QueryBatch, TrainedModel
from .clustering import ClusterModel
from .perf import ErrorMatrix

logger = logging.getLogger(__name__)


@dataclass
class ClusterAlgoTable:
    """Per-cluster MAE of every pool algorithm, with best/second-best marks."""

    pool: list[str]
    per_cluster_mae: np.ndarray   # (n_clusters, len(pool)); NaN for empty clusters
    best: np.ndarray              # pool index per cluster
    second: np.ndarray            # pool index per cluster (-1 for pools of one)
    cluster_sizes: np.ndarray

    @property
    def n_clusters(self) -> int:
        return len(self.best)

    def best_id(self, cluster: int) -> str:
        return self.pool[self.best[cluster]]


def best_per_cluster(E_train: ErrorMatrix, labels: np.ndarray, pool) -> ClusterAlgoTable:
    """Group training errors by cluster and rank the pool per cluster.

    Ties resolve toward the lower overall-training-MAE algorithm, then the
    lexicographically smaller id.  Empty clusters route to the overall-best
    pool algorithm (with a warning).
    """
    pool = list(pool)
    if not pool:
        raise ValueError("pool must not be empty")
    missing = [a for a in pool if a not in E_train.algorithm_ids]
    if missing:
        raise ValueError(f"pool algorithms absent from the error matrix: {missing}")
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != E_train.n_instances:
        raise ValueError("cluster labels not aligned with error-matrix rows")

    cols = [E_train.algorithm_ids.index(a) for a in pool]
    errors = E_train.errors[:, cols]
    overall = errors.mean(axis=0)
    # rank by (overall MAE, id); lower rank wins ties
    priority = sorted(range(len(pool)), key=lambda j: (overall[j], pool[j]))
    rank = np.empty(len(pool))
    for pos, j in enumerate(priority):
        rank[j] = pos

    n_clusters = int(labels.max()) + 1 if len(labels) else 0
    sizes = np.bincount(labels, minlength=n_clusters)
    table = np.full((n_clusters, len(pool)), np.nan)
    best = np.empty(n_clusters, dtype=np.int64)
    second = np.full(n_clusters, -1, dtype=np.int64)
    overall_best = priority[0]
    for c in range(n_clusters):
        members = labels == c
        if not members.any():
            logger.warning("cluster %d has no training instances; routing to %s",
                           c, pool[overall_best])
            best[c] = overall_best
            continue
        cluster_mae = errors[members].mean(axis=0)
        table[c] = cluster_mae
        order = np.lexsort((rank, cluster_mae))
        best[c] = order[0]
        if len(pool) > 1:
            second[c] = order[1]
    return ClusterAlgoTable(pool=pool, per_cluster_mae=table, best=best,
                            second=second, cluster_sizes=sizes)


@dataclass
class SelectorModel:
    """Everything needed to route an unseen instance and score it."""

    table: ClusterAlgoTable
    clusters: ClusterModel
    models: dict[str, TrainedModel]

    def select_and_predict(self, q: PredictionQuery, x_ext: np.ndarray) -> tuple[str, float]:
        cluster = int(self.clusters.assign_features(np.asarray(x_ext)[None, :])[0])
        algorithm_id = self.table.best_id(cluster)
        return algorithm_id, self.models[algorithm_id].predict(q)

    def route_many(self, batch: QueryBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (cluster ids, chosen pool indices, predictions)."""
        clusters = self.clusters.assign_features(batch.features_ext)
        choices = self.table.best[clusters]
        preds = np.empty(len(batch))
        for j, algorithm_id in enumerate(self.table.pool):
            mask = choices == j
            if not mask.any():
                continue
            sub = QueryBatch(
                users=batch.users[mask], items=batch.items[mask],
                indices=batch.indices[mask],
                features_base=None if batch.features_base is None else batch.features_base[mask],
                features_ext=batch.features_ext[mask],
            )
            preds[mask] = self.models[algorithm_id].predict_many(sub)
        return clusters, choices, preds


def mean_ensemble_many(models: dict[str, TrainedModel], batch: QueryBatch) -> np.ndarray:
    """Mean of the pool's clamped predictions, clamped again."""
    if not models:
        raise ValueError("ensemble needs at least one model")
    total = np.zeros(len(batch))
    scale = None
    for model in models.values():
        total += model.predict_many(batch)
        scale = model.scale
    mean = total / len(models)
    return np.clip(mean, scale[0], scale[1])


def mean_ensemble(models: dict[str, TrainedModel], q: PredictionQuery,
                  x_ext: np.ndarray | None = None) -> float:
    preds = []
    scale = None
    for model in models.values():
        preds.append(model.predict(q))
        scale = model.scale
    if not preds:
        raise ValueError("ensemble needs at least one model")
    return float(np.clip(np.mean(preds), scale[0], scale[1]))
