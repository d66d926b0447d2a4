"""Backend dispatch for the Chebyshev recurrence kernels.

The compiled Cython extension is preferred when importable; otherwise the
scipy fallback is used. Both expose the same operations on CSR matrices:

- ``spmm(matrix, x)``: sparse @ dense product
- ``cheb_basis(matrix, x, order)``: stacked T_j(A) x for the three-term
  Chebyshev recurrence
- ``cheb_reverse(matrix, bars)``: reverse-mode accumulation through the
  recurrence (adjoint of ``cheb_basis`` contracted against per-order
  upstream gradients)

Set SPECTRALMESH_NO_EXTENSION=1 to force the fallback, e.g. for the
kernel benchmark.
"""

import os

import numpy as np

from . import fallback

_DISABLED = os.environ.get("SPECTRALMESH_NO_EXTENSION", "0") not in ("", "0")

try:
    if _DISABLED:
        raise ImportError("extension disabled by environment")
    from . import _chebcore

    HAVE_COMPILED = True
except ImportError:
    _chebcore = None
    HAVE_COMPILED = False


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "scipy"


def _csr_parts(matrix):
    return matrix.indptr, matrix.indices, matrix.data


def spmm(matrix, x: np.ndarray) -> np.ndarray:
    """Return matrix @ x as a C-contiguous float64 (rows, c) array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    # the compiled kernel indexes x by raw CSR column indices, so a shape
    # mismatch must be rejected here rather than read out of bounds
    if x.ndim != 2 or x.shape[0] != matrix.shape[1]:
        raise ValueError(
            f"operand of shape {x.shape} incompatible with "
            f"{matrix.shape[0]}x{matrix.shape[1]} matrix"
        )
    out = np.empty((matrix.shape[0], x.shape[1]), dtype=np.float64)
    indptr, indices, data = _csr_parts(matrix)
    if HAVE_COMPILED:
        _chebcore.csr_matmat(indptr, indices, data, x, out)
    else:
        fallback.csr_matmat(indptr, indices, data, x, out)
    return out


def cheb_basis(matrix, x: np.ndarray, order: int) -> np.ndarray:
    """Return T stacked as (order, n, c) with T[j] = T_j(matrix) @ x."""
    if order < 1:
        raise ValueError("Chebyshev order must be at least 1")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != matrix.shape[1]:
        raise ValueError(
            f"operand of shape {x.shape} incompatible with "
            f"{matrix.shape[0]}x{matrix.shape[1]} matrix"
        )
    out = np.empty((order,) + x.shape, dtype=np.float64)
    indptr, indices, data = _csr_parts(matrix)
    if HAVE_COMPILED:
        _chebcore.cheb_basis(indptr, indices, data, x, out)
    else:
        fallback.cheb_basis(indptr, indices, data, x, out)
    return out


def cheb_reverse(matrix, bars: np.ndarray) -> np.ndarray:
    """Propagate per-order upstream gradients back to the recurrence input.

    ``bars[j]`` holds dL/dT_j as produced downstream of ``cheb_basis``.
    Returns dL/dx, exploiting that the operator is symmetric. The sweep
    mirrors T_j = 2 A T_{j-1} - T_{j-2} in reverse:

        bar_{j-1} += 2 A bar_j,  bar_{j-2} -= bar_j,  then bar_0 += A bar_1
    """
    order = bars.shape[0]
    acc = [np.array(bars[j], dtype=np.float64, copy=True) for j in range(order)]
    for j in range(order - 1, 1, -1):
        acc[j - 1] += 2.0 * spmm(matrix, acc[j])
        acc[j - 2] -= acc[j]
    if order > 1:
        acc[0] += spmm(matrix, acc[1])
    return acc[0]
