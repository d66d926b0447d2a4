"""Graph Laplacians, the dense eigenbasis reference path, and fast
Chebyshev filtering.

The Laplacian is the non-normalized D - W so that
(L f)(i) = sum_j W_ij (f(i) - f(j)). The fast filter path evaluates a
Chebyshev series in the rescaled operator 2 L / lambda_max - I through the
three-term recurrence and touches only CSR data; the dense path filters
through the full eigendecomposition and exists as an independent
cross-check for small graphs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy import sparse

from . import _kernels
from .mesh import Topology

DENSE_VERTEX_LIMIT = 2000


class DenseLimitExceeded(ValueError):
    """Eigendecomposition refused above DENSE_VERTEX_LIMIT vertices."""


@dataclass(frozen=True)
class GraphLaplacian:
    """Sparse Laplacian bundle: L = D - W plus a spectral upper bound.

    lambda_max is a power-iteration estimate of the top eigenvalue inflated
    by 1 percent, so the rescaled operator has spectrum inside [-1, 1).
    """

    laplacian: sparse.csr_matrix
    adjacency: sparse.csr_matrix
    degree: np.ndarray
    lambda_max: float

    @property
    def num_vertices(self) -> int:
        return self.laplacian.shape[0]

    @cached_property
    def rescaled(self) -> sparse.csr_matrix:
        """2 L / lambda_max - I as canonical CSR."""
        if self.lambda_max <= 0:
            raise ValueError("rescaling requires lambda_max > 0")
        n = self.num_vertices
        mat = (2.0 / self.lambda_max) * self.laplacian - sparse.identity(
            n, dtype=np.float64, format="csr"
        )
        mat = mat.tocsr()
        mat.sort_indices()
        return mat


@dataclass(frozen=True)
class EigenBasis:
    """Full orthonormal eigenpairs of a Laplacian (ascending eigenvalues)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are eigenvectors


@dataclass(frozen=True)
class ChebCoeffs:
    """Chebyshev series coefficients alpha_0 .. alpha_{r-1}."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("coefficients must be a non-empty 1-D array")
        if not np.isfinite(arr).all():
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", arr)

    @property
    def order(self) -> int:
        return self.coeffs.size


def _power_iteration_top_eig(mat: sparse.csr_matrix, tol: float, max_iter: int = 20000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Deterministic start vector; converged when the Rayleigh quotient moves
    by less than ``tol`` relatively between sweeps.
    """
    n = mat.shape[0]
    if n == 0:
        return 0.0
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = mat @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_new = float(v @ (mat @ v))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    return lam


def build_laplacian(
    topology: Topology,
    weights: dict[tuple[int, int], float] | None = None,
    power_tol: float = 1e-6,
) -> GraphLaplacian:
    """Assemble L = D - W from a topology's edge set.

    ``weights`` maps undirected edges (i, j) with i < j to positive weights;
    omitted edges default to 1 (binary adjacency). Every row of L sums to
    zero and the matrix is symmetric PSD by construction.
    """
    return laplacian_from_edges(
        topology.num_vertices, topology.edges, weights, power_tol
    )


def laplacian_from_edges(
    num_vertices: int,
    edges,
    weights: dict[tuple[int, int], float] | None = None,
    power_tol: float = 1e-6,
) -> GraphLaplacian:
    """Laplacian of an arbitrary undirected graph given as an edge list.

    Mesh topologies go through :func:`build_laplacian`; this entry point
    also admits non-triangulable graphs (paths, trees) used as analytic
    references.
    """
    n = int(num_vertices)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = np.unique(np.sort(edges, axis=1), axis=0) if len(edges) else edges
    if len(edges) and (edges[:, 0] == edges[:, 1]).any():
        raise ValueError("self loops are not allowed")
    if len(edges) and ((edges < 0).any() or (edges >= n).any()):
        raise ValueError("edge endpoint out of range")
    if weights is None:
        vals = np.ones(len(edges), dtype=np.float64)
    else:
        vals = np.empty(len(edges), dtype=np.float64)
        edge_set = {(int(a), int(b)) for a, b in edges}
        for key in weights:
            a, b = (int(key[0]), int(key[1]))
            if (min(a, b), max(a, b)) not in edge_set:
                raise ValueError(f"weight given for non-edge {key}")
        for k, (a, b) in enumerate(edges):
            w = weights.get((int(a), int(b)), weights.get((int(b), int(a)), 1.0))
            if w <= 0 or not np.isfinite(w):
                raise ValueError(f"edge ({a}, {b}) needs a positive finite weight")
            vals[k] = w

    if len(edges):
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        data = np.concatenate([vals, vals])
        adjacency = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    else:
        adjacency = sparse.csr_matrix((n, n), dtype=np.float64)
    adjacency.sort_indices()
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    laplacian = (sparse.diags(degree) - adjacency).tocsr()
    laplacian.sort_indices()

    lam = _power_iteration_top_eig(laplacian, tol=power_tol)
    lambda_max = lam * 1.01
    return GraphLaplacian(
        laplacian=laplacian,
        adjacency=adjacency,
        degree=degree,
        lambda_max=lambda_max,
    )


def eigendecompose(lap: GraphLaplacian, dense_limit: int = DENSE_VERTEX_LIMIT) -> EigenBasis:
    """Dense symmetric eigendecomposition, refused above ``dense_limit``.

    This is the reference path only; large graphs should go through
    :func:`cheb_filter`, which never materializes a dense operator.
    """
    n = lap.num_vertices
    if n > dense_limit:
        raise DenseLimitExceeded(
            f"{n} vertices exceeds the dense eigendecomposition cap "
            f"({dense_limit}); use the Chebyshev filtering path instead"
        )
    eigenvalues, eigenvectors = np.linalg.eigh(lap.laplacian.toarray())
    return EigenBasis(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def gft(basis: EigenBasis, signal: np.ndarray) -> np.ndarray:
    """Graph Fourier transform: coefficients Phi^T f."""
    return basis.eigenvectors.T @ signal


def igft(basis: EigenBasis, coefficients: np.ndarray) -> np.ndarray:
    """Inverse graph Fourier transform: Phi f_hat."""
    return basis.eigenvectors @ coefficients


def cheb_filter(lap: GraphLaplacian, coeffs: ChebCoeffs, signal: np.ndarray) -> np.ndarray:
    """Apply sum_j alpha_j T_j(L_rescaled) to a (n,) or (n, c) signal.

    Output at vertex i depends only on vertices within order-1 hops of i,
    and independent columns are filtered with bitwise-identical results.
    """
    if lap.lambda_max <= 0:
        raise ValueError("cheb_filter requires lambda_max > 0")
    squeeze = signal.ndim == 1
    x = np.atleast_2d(np.asarray(signal, dtype=np.float64).T).T
    if x.shape[0] != lap.num_vertices:
        raise ValueError(
            f"signal has {x.shape[0]} rows, expected {lap.num_vertices}"
        )
    basis = _kernels.cheb_basis(lap.rescaled, x, coeffs.order)
    out = np.tensordot(coeffs.coeffs, basis, axes=1)
    return out[:, 0] if squeeze else out


def spectral_reference_filter(
    basis: EigenBasis,
    coeffs: ChebCoeffs,
    lambda_max: float,
    signal: np.ndarray,
) -> np.ndarray:
    """Dense cross-check of :func:`cheb_filter`: Phi p(Lambda~) Phi^T f.

    Evaluates the same Chebyshev series at the rescaled eigenvalues
    2 lambda / lambda_max - 1 and filters through the eigenbasis. Kept
    deliberately independent of the recurrence kernels.
    """
    mu = 2.0 * basis.eigenvalues / lambda_max - 1.0
    gains = npcheb.chebval(mu, coeffs.coeffs)
    spectrum = gft(basis, signal)
    if spectrum.ndim == 1:
        return igft(basis, gains * spectrum)
    return igft(basis, gains[:, None] * spectrum)


def spectral_transfer_filter(basis: EigenBasis, transfer, signal: np.ndarray) -> np.ndarray:
    """Filter by an arbitrary spectral transfer function h(lambda)."""
    gains = np.asarray([transfer(lam) for lam in basis.eigenvalues], dtype=np.float64)
    spectrum = gft(basis, signal)
    if spectrum.ndim == 1:
        return igft(basis, gains * spectrum)
    return igft(basis, gains[:, None] * spectrum)
