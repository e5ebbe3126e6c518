"""Instance x algorithm absolute-error matrices and what they reveal:
per-algorithm effectiveness profiles, oracle error for algorithm subsets,
and the cumulative combination curve.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .stats import mae


@dataclass
class ErrorMatrix:
    """Absolute rating-prediction errors, one row per instance, one column
    per algorithm.  Complete (no holes), all entries finite and >= 0."""

    errors: np.ndarray
    algorithm_ids: list[str]
    instance_ids: np.ndarray
    fold: int | None = None

    @property
    def n_instances(self) -> int:
        return self.errors.shape[0]

    def column(self, algorithm_id: str) -> np.ndarray:
        return self.errors[:, self.algorithm_ids.index(algorithm_id)]

    def column_mae(self) -> dict[str, float]:
        return {a: float(self.errors[:, j].mean()) for j, a in enumerate(self.algorithm_ids)}


def build_error_matrix(models, batch, truths, fold: int | None = None) -> ErrorMatrix:
    """E[i][a] = |prediction of model a on instance i - truth_i|.

    ``models`` maps algorithm id -> fitted model; all must share the batch.
    """
    truths = np.asarray(truths, dtype=np.float64)
    ids = list(models)
    errors = np.empty((len(truths), len(ids)))
    for j, algorithm_id in enumerate(ids):
        preds = models[algorithm_id].predict_many(batch)
        bad = ~np.isfinite(preds)
        if bad.any():
            first = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"non-finite prediction from {algorithm_id} on instance "
                f"{int(batch.indices[first])}"
            )
        errors[:, j] = np.abs(preds - truths)
    return ErrorMatrix(errors, ids, np.asarray(batch.indices, dtype=np.int64), fold)


def pool_matrices(parts: list[ErrorMatrix]) -> ErrorMatrix:
    """Stack per-fold matrices over instances (identical algorithm lists)."""
    ids = parts[0].algorithm_ids
    for p in parts[1:]:
        if p.algorithm_ids != ids:
            raise ValueError("cannot pool error matrices with different algorithm lists")
    return ErrorMatrix(
        np.vstack([p.errors for p in parts]),
        list(ids),
        np.concatenate([p.instance_ids for p in parts]),
        fold=None,
    )


@dataclass
class EffectivenessProfile:
    algorithm_ids: list[str]
    overall_mae: np.ndarray
    most_effective_pct: np.ndarray
    least_effective_pct: np.ndarray

    def as_rows(self):
        for j, a in enumerate(self.algorithm_ids):
            yield a, float(self.overall_mae[j]), float(self.most_effective_pct[j]), \
                float(self.least_effective_pct[j])


def _tie_priority(E: ErrorMatrix) -> np.ndarray:
    """Column order for tie-breaking: lower overall MAE first, then id."""
    overall = E.errors.mean(axis=0)
    return np.array(
        sorted(range(len(E.algorithm_ids)), key=lambda j: (overall[j], E.algorithm_ids[j])),
        dtype=np.int64,
    )


def effectiveness_profile(E: ErrorMatrix) -> EffectivenessProfile:
    """Per algorithm: overall MAE and the share of instances where it is the
    most / least effective.  Ties go to the lower-overall-MAE algorithm."""
    priority = _tie_priority(E)
    reordered = E.errors[:, priority]
    best = priority[np.argmin(reordered, axis=1)]   # argmin takes first => best priority
    worst = priority[np.argmax(reordered, axis=1)]
    n = E.n_instances
    m = len(E.algorithm_ids)
    return EffectivenessProfile(
        algorithm_ids=list(E.algorithm_ids),
        overall_mae=E.errors.mean(axis=0),
        most_effective_pct=100.0 * np.bincount(best, minlength=m) / n,
        least_effective_pct=100.0 * np.bincount(worst, minlength=m) / n,
    )


def oracle_mae(E: ErrorMatrix, subset) -> float:
    """Mean over instances of the minimum error within the subset."""
    subset = list(subset)
    if not subset:
        raise ValueError("oracle over an empty algorithm subset is undefined")
    cols = [E.algorithm_ids.index(a) for a in subset]
    return float(E.errors[:, cols].min(axis=1).mean())


def combination_curve(E: ErrorMatrix, profile: EffectivenessProfile) -> list[tuple[tuple[str, ...], float]]:
    """Oracle MAE of top-k prefixes, algorithms ordered by descending
    most-effective share (ties toward lower overall MAE, then id)."""
    order = sorted(
        range(len(profile.algorithm_ids)),
        key=lambda j: (
            -profile.most_effective_pct[j],
            profile.overall_mae[j],
            profile.algorithm_ids[j],
        ),
    )
    ordered_ids = [profile.algorithm_ids[j] for j in order]
    curve = []
    for k in range(1, len(ordered_ids) + 1):
        prefix = tuple(ordered_ids[:k])
        curve.append((prefix, oracle_mae(E, prefix)))
    return curve


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def write_error_matrix_csv(E: ErrorMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id"] + list(E.algorithm_ids))
        for row_id, row in zip(E.instance_ids, E.errors):
            writer.writerow([int(row_id)] + [repr(float(v)) for v in row])


def read_error_matrix_csv(path) -> ErrorMatrix:
    """Read a matrix written by write_error_matrix_csv, or a bare matrix
    whose header holds only algorithm ids."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}:1: empty error-matrix CSV")
        has_ids = header[0].strip().lower() == "instance_id"
        ids = [h.strip() for h in (header[1:] if has_ids else header)]
        if not ids:
            raise ValueError(f"{path}:1: no algorithm columns in header")
        rows, instance_ids = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            expected = len(ids) + (1 if has_ids else 0)
            if len(row) != expected:
                raise ValueError(f"{path}:{lineno}: expected {expected} fields, got {len(row)}")
            try:
                values = [float(v) for v in (row[1:] if has_ids else row)]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric error value") from None
            if any(not np.isfinite(v) or v < 0 for v in values):
                raise ValueError(f"{path}:{lineno}: errors must be finite and >= 0")
            instance_ids.append(int(row[0]) if has_ids else lineno - 2)
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no error rows")
    return ErrorMatrix(np.array(rows), ids, np.array(instance_ids, dtype=np.int64))
