"""Instance-space geometry: PCA to 3 components, k-means with WSS tracking,
elbow selection, and a KNN cluster assigner for unseen instances."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree


@dataclass
class PCAModel:
    mean: np.ndarray                 # (d,)
    components: np.ndarray           # (d, n_components), orthonormal columns
    explained_variance: np.ndarray   # non-increasing

    def project(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components

    def reconstruct(self, Y: np.ndarray) -> np.ndarray:
        return np.asarray(Y, dtype=np.float64) @ self.components.T + self.mean


def fit_pca(X: np.ndarray, n_components: int = 3) -> PCAModel:
    """Top eigenvectors of the covariance of mean-centered X.

    Sign convention: the largest-magnitude coordinate of each component is
    positive.  Raises when the centered data has rank < n_components.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n <= n_components:
        raise ValueError(f"need more than {n_components} rows, got {n}")
    if not np.isfinite(X).all():
        raise ValueError("feature matrix contains non-finite values")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    top_vals = eigvals[order]
    if top_vals[-1] <= max(1e-12 * max(top_vals[0], 0.0), 1e-30):
        raise ValueError(
            f"insufficient variance: centered data has rank < {n_components}"
        )
    W = eigvecs[:, order]
    for j in range(W.shape[1]):
        pivot = np.argmax(np.abs(W[:, j]))
        if W[pivot, j] < 0:
            W[:, j] = -W[:, j]
    return PCAModel(mean=mean, components=W, explained_variance=top_vals)


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    wss: float
    seed: int
    wss_history: list[float] = field(default_factory=list)
    n_iter: int = 0

    def assign(self, Y: np.ndarray) -> np.ndarray:
        return _nearest_centroid(np.asarray(Y, dtype=np.float64), self.centroids)[0]


def _nearest_centroid(Y, centroids):
    d2 = _sq_distances(Y, centroids)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(Y)), labels]


def _sq_distances(Y, C):
    # |y - c|^2 = |y|^2 - 2 y.c + |c|^2; clip tiny negatives from rounding
    d2 = (Y * Y).sum(axis=1)[:, None] - 2.0 * (Y @ C.T) + (C * C).sum(axis=1)[None, :]
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(Y, k, rng):
    """k-means++ seeding; duplicates fall back to jittered resampling."""
    n = len(Y)
    centroids = np.empty((k, Y.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = Y[first]
    d2 = _sq_distances(Y, centroids[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            warnings.warn(
                "k-means++ found fewer distinct points than clusters; "
                "sampling with replacement plus jitter"
            )
            idx = rng.integers(n, size=k - j)
            centroids[j:] = Y[idx] + rng.normal(0.0, 1e-9, (k - j, Y.shape[1]))
            return centroids
        probs = d2 / total
        choice = int(rng.choice(n, p=probs))
        centroids[j] = Y[choice]
        d2 = np.minimum(d2, _sq_distances(Y, centroids[j:j + 1]).ravel())
    return centroids


def _lloyd(Y, centroids, max_iter, tol):
    k = len(centroids)
    labels = _nearest_centroid(Y, centroids)[0]
    history: list[float] = []
    n_iter = 0
    for _ in range(max_iter):
        n_iter += 1
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        sums = np.zeros_like(centroids)
        for dim in range(Y.shape[1]):
            sums[:, dim] = np.bincount(labels, weights=Y[:, dim], minlength=k)
        new_centroids = sums / np.maximum(counts, 1.0)[:, None]
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            # re-seed each empty centroid at the point farthest from its own
            _, d2 = _nearest_centroid(Y, new_centroids[counts > 0])
            order = np.argsort(d2)[::-1]
            for slot, point in zip(empty, order):
                new_centroids[slot] = Y[point]
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        new_labels, dists = _nearest_centroid(Y, centroids)
        history.append(float(dists.sum()))
        stable = bool((new_labels == labels).all()) and not len(empty)
        labels = new_labels
        if stable or shift < tol:
            break
    # lock the mean invariant: centroids are the means of their final members
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros_like(centroids)
    for dim in range(Y.shape[1]):
        sums[:, dim] = np.bincount(labels, weights=Y[:, dim], minlength=k)
    occupied = counts > 0
    centroids[occupied] = sums[occupied] / counts[occupied, None]
    wss = float(_wss_of(Y, centroids, labels))
    history.append(wss)
    return centroids, labels, wss, history, n_iter


def _wss_of(Y, centroids, labels):
    diff = Y - centroids[labels]
    return (diff * diff).sum()


def fit_kmeans(Y: np.ndarray, k: int, seed: int, max_iter: int = 300,
               tol: float = 1e-6, n_init: int = 10,
               warm_start: np.ndarray | None = None) -> KMeansModel:
    """Best-WSS k-means over ``n_init`` k-means++ restarts from ``seed``.

    ``warm_start`` adds one extra run initialized from the given centroids
    (used by the WSS curve so the curve is non-increasing in k).
    """
    Y = np.asarray(Y, dtype=np.float64)
    n = len(Y)
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    root = np.random.SeedSequence([seed, k])
    best = None
    inits = [_kmeans_pp_init(Y, k, np.random.default_rng(s)) for s in root.spawn(n_init)]
    if warm_start is not None:
        inits.append(np.asarray(warm_start, dtype=np.float64))
    for init in inits:
        centroids, labels, wss, history, n_iter = _lloyd(Y, init.copy(), max_iter, tol)
        if best is None or wss < best.wss:
            best = KMeansModel(k=k, centroids=centroids, labels=labels, wss=wss,
                               seed=seed, wss_history=history, n_iter=n_iter)
    return best


def wss_curve(Y: np.ndarray, k_range: tuple[int, int], seed: int,
              n_init: int = 10) -> list[tuple[int, float]]:
    """(k, best WSS) over an inclusive k range; each k also warm-starts from
    the previous k's solution plus one far point, so WSS never increases."""
    k_lo, k_hi = k_range
    Y = np.asarray(Y, dtype=np.float64)
    if k_hi > len(Y):
        raise ValueError(f"k_hi={k_hi} exceeds {len(Y)} points")
    curve = []
    prev: KMeansModel | None = None
    for k in range(k_lo, k_hi + 1):
        warm = None
        if prev is not None:
            _, d2 = _nearest_centroid(Y, prev.centroids)
            warm = np.vstack([prev.centroids, Y[int(np.argmax(d2))]])
        model = fit_kmeans(Y, k, seed, n_init=n_init, warm_start=warm)
        curve.append((k, model.wss))
        prev = model
    return curve


def select_k_elbow(curve: list[tuple[int, float]]) -> int:
    """k with the largest second-order WSS difference (interior points only);
    ties resolve to the smallest such k."""
    if len(curve) < 3:
        raise ValueError("elbow selection needs a WSS curve of length >= 3")
    ks = [k for k, _ in curve]
    wss = [w for _, w in curve]
    best_k, best_gap = ks[1], -np.inf
    for j in range(1, len(curve) - 1):
        gap = wss[j - 1] - 2.0 * wss[j] + wss[j + 1]
        if gap > best_gap:
            best_gap, best_k = gap, ks[j]
    return best_k


# ---------------------------------------------------------------------------
# Cluster assignment for unseen instances
# ---------------------------------------------------------------------------

@dataclass
class ClusterAssigner:
    """Majority vote over the k_nn nearest training points (Euclidean);
    a tied vote falls back to the single nearest point's label."""

    points: np.ndarray
    labels: np.ndarray
    k_nn: int = 1

    def __post_init__(self):
        if self.k_nn < 1:
            raise ValueError("k_nn must be >= 1")
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self._tree = cKDTree(self.points)

    def assign(self, y: np.ndarray) -> int:
        return int(self.assign_many(np.asarray(y, dtype=np.float64)[None, :])[0])

    def assign_many(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=np.float64)
        k = min(self.k_nn, len(self.points))
        _, idx = self._tree.query(Y, k=k)
        if k == 1:
            return self.labels[np.asarray(idx).reshape(-1)]
        votes = self.labels[idx]  # (n, k), ordered nearest first
        out = np.empty(len(Y), dtype=np.int64)
        for row in range(len(Y)):
            counts = np.bincount(votes[row])
            top = counts.max()
            if (counts == top).sum() > 1:
                out[row] = votes[row, 0]  # tie: nearest point decides
            else:
                out[row] = int(np.argmax(counts))
        return out


# ---------------------------------------------------------------------------
# Bundled model + JSON round trip
# ---------------------------------------------------------------------------

@dataclass
class ClusterModel:
    pca: PCAModel
    kmeans: KMeansModel
    assigner: ClusterAssigner

    def assign_features(self, X: np.ndarray) -> np.ndarray:
        return self.assigner.assign_many(self.pca.project(X))

    def to_json(self) -> str:
        return json.dumps({
            "pca": {
                "mean": self.pca.mean.tolist(),
                "components": self.pca.components.tolist(),
                "explained_variance": self.pca.explained_variance.tolist(),
            },
            "kmeans": {
                "k": self.kmeans.k,
                "centroids": self.kmeans.centroids.tolist(),
                "labels": self.kmeans.labels.tolist(),
                "wss": self.kmeans.wss,
                "seed": self.kmeans.seed,
            },
            "assigner": {
                "k_nn": self.assigner.k_nn,
                "points": self.assigner.points.tolist(),
                "labels": self.assigner.labels.tolist(),
            },
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ClusterModel":
        blob = json.loads(text)
        pca = PCAModel(
            mean=np.array(blob["pca"]["mean"]),
            components=np.array(blob["pca"]["components"]),
            explained_variance=np.array(blob["pca"]["explained_variance"]),
        )
        km = KMeansModel(
            k=blob["kmeans"]["k"],
            centroids=np.array(blob["kmeans"]["centroids"]),
            labels=np.array(blob["kmeans"]["labels"], dtype=np.int64),
            wss=blob["kmeans"]["wss"],
            seed=blob["kmeans"]["seed"],
        )
        assigner = ClusterAssigner(
            points=np.array(blob["assigner"]["points"]),
            labels=np.array(blob["assigner"]["labels"], dtype=np.int64),
            k_nn=blob["assigner"]["k_nn"],
        )
        return cls(pca=pca, kmeans=km, assigner=assigner)
