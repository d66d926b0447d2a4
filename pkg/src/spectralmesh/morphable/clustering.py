"""Lloyd k-means with k-means++ seeding.

Small and deterministic on purpose: pose corpora here are a few thousand
points in at most a handful of dimensions, so plain numpy iterations are
fast enough and easy to audit.
"""

from __future__ import annotations

import numpy as np

DEFAULT_MAX_ITER = 300


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[rng.integers(n)]
    closest = np.full(n, np.inf)
    for i in range(1, k):
        dist = ((points - centers[i - 1]) ** 2).sum(axis=1)
        np.minimum(closest, dist, out=closest)
        total = closest.sum()
        if total <= 0:
            # all remaining points coincide with a chosen center
            centers[i:] = centers[i - 1]
            return centers
        centers[i] = points[rng.choice(n, p=closest / total)]
    return centers


def _lloyd(
    points: np.ndarray, centers: np.ndarray, max_iter: int
) -> tuple[np.ndarray, np.ndarray, float]:
    k = len(centers)
    labels = np.zeros(len(points), dtype=np.int64)
    for _ in range(max_iter):
        # pairwise squared distances, (n, k)
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        for c in range(k):
            mask = new_labels == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
            else:
                # re-seed an empty cluster at the farthest point
                far = d2.min(axis=1).argmax()
                centers[c] = points[far]
                new_labels[far] = c
        if (new_labels == labels).all():
            labels = new_labels
            break
        labels = new_labels
    inertia = float(((points - centers[labels]) ** 2).sum())
    return centers, labels, inertia


def kmeans(
    points,
    k: int,
    *,
    seed: int = 0,
    restarts: int = 1,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Cluster points into k groups; returns (centers, labels, inertia).

    Runs ``restarts`` independent k-means++ initializations and keeps the
    lowest-inertia result. Deterministic for a fixed seed.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.ndim != 2:
        raise ValueError("points must be (n, d)")
    if not 1 <= k <= len(points):
        raise ValueError(f"k must be in [1, {len(points)}], got {k}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for _ in range(restarts):
        centers = _plusplus_init(points, k, rng)
        result = _lloyd(points, centers, max_iter)
        if best is None or result[2] < best[2]:
            best = result
    assert best is not None
    return best
