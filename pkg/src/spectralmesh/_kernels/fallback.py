"""Pure scipy implementations of the Chebyshev CSR kernels.

Used when the compiled extension is unavailable or disabled via
SPECTRALMESH_NO_EXTENSION=1. Same contracts as the compiled module.
"""

import numpy as np


def csr_matmat(indptr, indices, data, x, out):
    # Rebuilding a csr_matrix view is cheap; scipy's C++ loop accumulates
    # in the same (row, nnz, column) order as the compiled kernel.
    from scipy import sparse

    mat = sparse.csr_matrix((data, indices, indptr), shape=(out.shape[0], x.shape[0]))
    np.copyto(out, mat @ x)


def cheb_basis(indptr, indices, data, x, out):
    from scipy import sparse

    order, n, _ = out.shape
    mat = sparse.csr_matrix((data, indices, indptr), shape=(n, n))
    out[0] = x
    if order == 1:
        return
    out[1] = mat @ x
    for j in range(2, order):
        out[j] = 2.0 * (mat @ out[j - 1])
        out[j] -= out[j - 2]
