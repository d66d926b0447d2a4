# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR kernels for Chebyshev filtering on graph signals.

The accumulation order matches scipy's csr_matvecs loop (row, then stored
nonzeros, then signal columns) so both backends agree to the last ulp when
compiled without FP contraction.
"""

cimport cython

ctypedef fused index_t:
    int
    long
    long long


cpdef void csr_matmat(const index_t[::1] indptr,
                      const index_t[::1] indices,
                      const double[::1] data,
                      const double[:, ::1] x,
                      double[:, ::1] out) noexcept nogil:
    """out = A @ x for CSR A (n x n) and dense x (n x c)."""
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t c = out.shape[1]
    cdef Py_ssize_t i, jj, k, col
    cdef double v
    for i in range(n):
        for k in range(c):
            out[i, k] = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            col = indices[jj]
            v = data[jj]
            for k in range(c):
                out[i, k] += v * x[col, k]


cpdef void cheb_basis(const index_t[::1] indptr,
                      const index_t[::1] indices,
                      const double[::1] data,
                      const double[:, ::1] x,
                      double[:, :, ::1] out) noexcept nogil:
    """Fill out[j] = T_j(A) x for j < out.shape[0].

    Three-term recurrence T_0 = I, T_1 = A, T_j = 2 A T_{j-1} - T_{j-2},
    fused so intermediate products never leave the output buffer.
    """
    cdef Py_ssize_t order = out.shape[0]
    cdef Py_ssize_t n = out.shape[1]
    cdef Py_ssize_t c = out.shape[2]
    cdef Py_ssize_t i, jj, k, col, j
    cdef double v, acc_scale
    for i in range(n):
        for k in range(c):
            out[0, i, k] = x[i, k]
    if order == 1:
        return
    csr_matmat(indptr, indices, data, x, out[1])
    for j in range(2, order):
        # out[j] = 2 A out[j-1] - out[j-2]
        for i in range(n):
            for k in range(c):
                out[j, i, k] = 0.0
            for jj in range(indptr[i], indptr[i + 1]):
                col = indices[jj]
                v = 2.0 * data[jj]
                for k in range(c):
                    out[j, i, k] += v * out[j - 1, col, k]
            for k in range(c):
                out[j, i, k] -= out[j - 2, i, k]
