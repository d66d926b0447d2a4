"""Pose sampling from per-joint euler-angle cluster centers.

A PoseClusterBook stores C cluster centers per joint, fit by k-means over
a pose corpus. Sampling picks one center per joint uniformly and adds a
small Gaussian jitter so the sampled set is not finite; shape coefficients
are i.i.d. standard normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import kmeans
from .pca import ShapeBasis
from .skinning import PoseParams

DEFAULT_NUM_CLUSTERS = 64
DEFAULT_JITTER = 0.05  # radians


@dataclass(frozen=True)
class PoseClusterBook:
    """Per-joint euler-angle cluster centers, shape (J, C, 3).

    active_axes marks which (joint, axis) entries the source corpus
    actually moved; jitter is confined to those so dead axes (tips,
    unarticulated roots, disabled twists) stay exactly at their centers.
    """

    centers: np.ndarray
    active_axes: np.ndarray | None = None

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        object.__setattr__(self, "centers", centers)
        if centers.ndim != 3 or centers.shape[2] != 3:
            raise ValueError("centers must be (J, C, 3)")
        if centers.shape[1] < 1:
            raise ValueError("need at least one cluster center per joint")
        if not np.isfinite(centers).all():
            raise ValueError("cluster centers must be finite")
        if self.active_axes is None:
            mask = np.ones((centers.shape[0], 3), dtype=bool)
        else:
            mask = np.asarray(self.active_axes, dtype=bool)
            if mask.shape != (centers.shape[0], 3):
                raise ValueError("active_axes must be (J, 3)")
        object.__setattr__(self, "active_axes", mask)

    @property
    def num_joints(self) -> int:
        return self.centers.shape[0]

    @property
    def num_clusters(self) -> int:
        return self.centers.shape[1]


def build_pose_cluster_book(
    pose_angles,
    num_clusters: int = DEFAULT_NUM_CLUSTERS,
    *,
    seed: int = 0,
    restarts: int = 1,
) -> PoseClusterBook:
    """Fit per-joint k-means over a pose corpus of shape (m, J, 3)."""
    pose_angles = np.asarray(pose_angles, dtype=np.float64)
    if pose_angles.ndim != 3 or pose_angles.shape[2] != 3:
        raise ValueError("pose corpus must be (m, J, 3)")
    m, J, _ = pose_angles.shape
    if m < num_clusters:
        raise ValueError(f"corpus has {m} poses, fewer than {num_clusters} clusters")
    centers = np.empty((J, num_clusters, 3), dtype=np.float64)
    for j in range(J):
        centers[j], _, _ = kmeans(
            pose_angles[:, j, :], num_clusters, seed=seed + j, restarts=restarts
        )
    active = pose_angles.max(axis=0) > pose_angles.min(axis=0)
    return PoseClusterBook(centers, active)


def sample_pose(
    book: PoseClusterBook,
    basis: ShapeBasis,
    seed,
    *,
    jitter: float = DEFAULT_JITTER,
) -> tuple[PoseParams, np.ndarray]:
    """Draw one (pose, shape coefficients) pair.

    One cluster center is chosen uniformly per joint (independent across
    joints), then perturbed by N(0, jitter^2) on the book's active axes;
    shape coefficients are standard normal. The global similarity is left
    at identity. A fixed seed reproduces the draw exactly.
    """
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    J, C, _ = book.centers.shape
    picks = rng.integers(C, size=J)
    angles = book.centers[np.arange(J), picks].copy()
    if jitter > 0:
        angles += rng.normal(0.0, jitter, size=(J, 3)) * book.active_axes
    coeffs = rng.standard_normal(basis.num_components)
    return PoseParams(angles=angles), coeffs
