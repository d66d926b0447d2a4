"""Closed-form similarity alignment and generalized Procrustes analysis."""

from __future__ import annotations

import numpy as np

from ..mesh import TriMesh


class RankError(ValueError):
    """Point configuration too degenerate for a unique similarity fit."""


def _as_points(mesh) -> np.ndarray:
    if isinstance(mesh, TriMesh):
        return mesh.vertices
    arr = np.asarray(mesh, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got {arr.shape}")
    return arr


def rms_radius(points: np.ndarray) -> float:
    """Root-mean-square distance of the points to their centroid."""
    centered = points - points.mean(axis=0)
    return float(np.sqrt((centered**2).sum() / len(points)))


def procrustes_similarity(source, target):
    """Least-squares similarity aligning source onto target.

    Solves min_{s, R, t} || s R x_i + t - y_i ||^2 in closed form via the
    SVD of the cross-covariance, forcing det(R) = +1 (reflections are
    corrected by flipping the smallest singular direction). Returns
    (scale, rotation (3, 3), translation (3,), residual) where residual is
    the Frobenius norm of the remaining error. Raises :class:`RankError`
    when the source is collinear or collapses to a point.
    """
    x = _as_points(source)
    y = _as_points(target)
    if x.shape != y.shape:
        raise ValueError(f"point sets differ in shape: {x.shape} vs {y.shape}")
    if len(x) < 3:
        raise RankError("need at least 3 points for a similarity fit")

    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    xc = x - mu_x
    yc = y - mu_y
    var_x = (xc**2).sum() / len(x)
    if var_x == 0:
        raise RankError("source points coincide; similarity is undefined")

    cov = (yc.T @ xc) / len(x)
    u, d, vt = np.linalg.svd(cov)
    if d[1] <= 1e-12 * max(d[0], 1e-300):
        raise RankError("source points are collinear; rotation is not unique")
    sign = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[-1] = -1.0
    rotation = u @ np.diag(sign) @ vt
    scale = float((d * sign).sum() / var_x)
    translation = mu_y - scale * rotation @ mu_x
    aligned = scale * x @ rotation.T + translation
    residual = float(np.linalg.norm(aligned - y))
    return scale, rotation, translation, residual


def apply_similarity(points, scale: float, rotation: np.ndarray, translation: np.ndarray):
    return scale * _as_points(points) @ rotation.T + translation


def generalized_procrustes(
    meshes: list,
    tol: float = 1e-9,
    max_iter: int = 100,
):
    """Iterative alignment of a mesh family into a shared canonical frame.

    Every shape is centered and scaled to unit RMS radius, then rotated to
    the running mean; the mean is renormalized each round until it moves
    less than ``tol`` (Frobenius) or ``max_iter`` rounds pass. Returns
    (aligned, mean) where aligned mirrors the input type (TriMesh in,
    TriMesh out). The canonical frame has centroid at the origin and unit
    RMS radius, with orientation anchored by the family average; that
    anchor makes re-aligning an already aligned family a no-op, and total
    residual to the mean never increases across iterations.
    """
    if len(meshes) == 0:
        raise ValueError("need at least one mesh")
    as_mesh = isinstance(meshes[0], TriMesh)
    points = [np.array(_as_points(m), dtype=np.float64) for m in meshes]

    def normalize(p: np.ndarray) -> np.ndarray:
        p = p - p.mean(axis=0)
        r = rms_radius(p)
        if r == 0:
            raise RankError("degenerate shape: all points coincide")
        return p / r

    aligned = [normalize(p) for p in points]
    # anchor the frame to the family average: for inputs already at the
    # fixed point the first round solves identity rotations and stops
    mean = normalize(np.mean(aligned, axis=0))
    for _ in range(max_iter):
        for i, p in enumerate(aligned):
            _, rotation, _, _ = procrustes_similarity(p, mean)
            aligned[i] = p @ rotation.T
        new_mean = normalize(np.mean(aligned, axis=0))
        shift = float(np.linalg.norm(new_mean - mean))
        mean = new_mean
        if shift < tol:
            break

    if as_mesh:
        topo = meshes[0].topology
        return [TriMesh(topo, p) for p in aligned], TriMesh(topo, mean)
    return aligned, mean
