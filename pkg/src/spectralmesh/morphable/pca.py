"""Linear statistical shape basis over Procrustes-aligned meshes.

Build the basis on the output of generalized Procrustes alignment so scale
and pose variation are removed before the decomposition; components then
describe shape only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mesh import TriMesh


@dataclass(frozen=True)
class ShapeBasis:
    """Mean shape plus orthonormal components scaled by coefficient stds.

    ``components[k]`` is the k-th orthonormal direction reshaped to (n, 3);
    ``stds[k]`` is the standard deviation of the training coefficients along
    it, so synthesis uses mean + sum_k c_k * stds[k] * components[k] with
    c in units of standard deviations.
    """

    mean: np.ndarray
    components: np.ndarray  # (K, n, 3)
    stds: np.ndarray  # (K,)

    @property
    def num_components(self) -> int:
        return len(self.stds)


def _stack(meshes) -> np.ndarray:
    rows = []
    for m in meshes:
        pts = m.vertices if isinstance(m, TriMesh) else np.asarray(m, dtype=np.float64)
        rows.append(pts.reshape(-1))
    return np.asarray(rows, dtype=np.float64)


def pca_fit(meshes, num_components: int) -> ShapeBasis:
    """Fit a shape basis by SVD of the centered training matrix.

    ``num_components`` must not exceed min(N - 1, 3n). Components are
    orthonormal; training residuals have zero mean along each component by
    construction.
    """
    data = _stack(meshes)
    n_samples, dim = data.shape
    max_rank = min(n_samples - 1, dim)
    if not 0 < num_components <= max_rank:
        raise ValueError(
            f"num_components must be in 1..{max_rank} for {n_samples} samples"
        )
    mean = data.mean(axis=0)
    centered = data - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:num_components]
    stds = singular[:num_components] / np.sqrt(n_samples - 1)
    n_vertices = dim // 3
    return ShapeBasis(
        mean=mean.reshape(n_vertices, 3),
        components=components.reshape(num_components, n_vertices, 3),
        stds=stds,
    )


def pca_synthesize(basis: ShapeBasis, coeffs: np.ndarray) -> np.ndarray:
    """Vertices for coefficients in std units: mean + sum c_k s_k comp_k."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (basis.num_components,):
        raise ValueError(
            f"expected {basis.num_components} coefficients, got {coeffs.shape}"
        )
    scaled = coeffs * basis.stds
    return basis.mean + np.tensordot(scaled, basis.components, axes=1)


def pca_project(basis: ShapeBasis, mesh) -> np.ndarray:
    """Coefficients (std units) of a mesh under the basis."""
    pts = mesh.vertices if isinstance(mesh, TriMesh) else np.asarray(mesh, dtype=np.float64)
    resid = (pts - basis.mean).reshape(-1)
    flat = basis.components.reshape(basis.num_components, -1)
    raw = flat @ resid
    safe = np.where(basis.stds > 0, basis.stds, 1.0)
    return raw / safe
