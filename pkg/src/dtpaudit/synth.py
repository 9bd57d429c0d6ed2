"""k-means++ clustering and purchase-style synthetic data."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import Dataset, binary_schema, encode

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective_history: tuple[float, ...]  # SSE after each assignment step
    iterations: int


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = [points[rng.integers(n)]]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every point already coincides with a centroid
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centroids.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centroids, dtype=np.float64)


def kmeans(points: np.ndarray, k: int, seed, max_iters: int = 100, tol: float = 1e-9) -> KMeansResult:
    """k-means++ seeding followed by Lloyd iterations.

    Stops when no centroid moves more than ``tol`` or after ``max_iters``
    rounds. A cluster that loses all its points keeps its previous centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("k-means needs a non-empty 2-d point array")
    if k <= 0:
        raise ValueError("k must be positive")
    if k > len(points):
        raise ValueError(f"k={k} exceeds number of points {len(points)}")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(points, k, rng)
    history = []
    labels = np.zeros(len(points), dtype=np.int64)
    it = 0
    for it in range(1, max_iters + 1):
        d2 = _sq_dists(points, centroids)
        labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(points)), labels].sum()))
        new = centroids.copy()
        for c in range(k):
            members = points[labels == c]
            if len(members):
                new[c] = members.mean(axis=0)
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        if shift <= tol:
            break
    d2 = _sq_dists(points, centroids)
    labels = d2.argmin(axis=1)
    history.append(float(d2[np.arange(len(points)), labels].sum()))
    return KMeansResult(labels, centroids, tuple(history), it)


def kmeans_cluster(d: Dataset, k: int, seed, max_iters: int = 100) -> np.ndarray:
    """Cluster index per record, computed on the encoded feature matrix."""
    if len(d) == 0:
        raise ValueError("cannot cluster an empty dataset")
    return kmeans(encode(d.schema, d.X), k, seed, max_iters).labels


def synth_purchase(n_records: int, n_features: int, n_classes: int, seed, max_retries: int = 10) -> Dataset:
    """Binary purchase-history-like records labelled by their k-means cluster.

    Each record draws its features from one of ``n_classes`` planted
    Bernoulli buying patterns; the final label is the k-means cluster index,
    not the planted pattern. If a cluster comes out empty the whole draw is
    repeated with ``seed + 1``.
    """
    if n_records < 1 or n_features < 1 or n_classes < 2 or n_classes > n_records:
        raise ValueError("degenerate sizes for synth_purchase")
    schema = binary_schema(n_features, n_classes)
    for attempt in range(max_retries + 1):
        s = seed + attempt
        rng = np.random.default_rng(s)
        # sparse baskets: most categories are rarely bought, a few are typical per pattern
        patterns = rng.uniform(0.02, 0.25, size=(n_classes, n_features))
        hot = rng.random((n_classes, n_features)) < 0.3
        patterns[hot] = rng.uniform(0.5, 0.9, size=hot.sum())
        planted = rng.integers(n_classes, size=n_records)
        X = (rng.random((n_records, n_features)) < patterns[planted]).astype(np.float64)
        labels = kmeans(X, n_classes, seed=s).labels
        if len(np.unique(labels)) == n_classes:
            return Dataset(schema, X, labels)
        log.debug("synth_purchase: empty cluster with seed %s, retrying", s)
    raise RuntimeError(f"synth_purchase: empty cluster after {max_retries} retries")
