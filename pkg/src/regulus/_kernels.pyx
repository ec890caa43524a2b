# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for batched one-sided Jacobi singular value decomposition.

The routines mirror :mod:`regulus._fallback` exactly (same rotation order,
same stopping rule) so both backends return the same numbers up to
floating-point reassociation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, log, frexp, ldexp

cnp.import_array()

cdef double TINY = 1e-280


cdef int _jacobi_one(double[:, ::1] a, double[:, ::1] v, int d,
                     double tol, int max_sweeps) noexcept nogil:
    """Orthogonalize the columns of ``a`` in place, accumulating rotations in ``v``.

    Returns the number of sweeps used, or -1 when ``max_sweeps`` is exhausted.
    """
    cdef int sweep, i, j, r
    cdef double alpha, beta, gamma, zeta, t, c, s, off, ai, aj, nrm
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(d - 1):
            for j in range(i + 1, d):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for r in range(d):
                    alpha += a[r, i] * a[r, i]
                    beta += a[r, j] * a[r, j]
                    gamma += a[r, i] * a[r, j]
                # columns at the underflow edge carry no usable direction
                if gamma == 0.0 or alpha < TINY or beta < TINY:
                    continue
                nrm = sqrt(alpha) * sqrt(beta)
                if fabs(gamma) / nrm > off:
                    off = fabs(gamma) / nrm
                if fabs(gamma) <= tol * nrm:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for r in range(d):
                    ai = a[r, i]
                    aj = a[r, j]
                    a[r, i] = c * ai - s * aj
                    a[r, j] = s * ai + c * aj
                    ai = v[r, i]
                    aj = v[r, j]
                    v[r, i] = c * ai - s * aj
                    v[r, j] = s * ai + c * aj
        if off <= tol:
            return sweep + 1
    return -1


def jacobi_svd_batch(cnp.ndarray mats, double tol=1e-14, int max_sweeps=60):
    """Batched one-sided Jacobi SVD of square matrices.

    Parameters
    ----------
    mats : ndarray, shape (n, d, d)
        Input matrices. They are copied, never modified.
    tol : float
        Stop once every normalized column inner product is below ``tol``.
    max_sweeps : int
        Sweep cap per matrix.

    Returns
    -------
    left : ndarray, shape (n, d, d)
        Left singular frames; columns ordered by decreasing singular value.
    sing_log : ndarray, shape (n, d)
        Log singular values, descending.
    right : ndarray, shape (n, d, d)
        Right singular frames.
    ok : ndarray of bool, shape (n,)
        False where the sweep cap was hit.
    """
    cdef const double[:, :, ::1] src = np.ascontiguousarray(mats, dtype=np.float64)
    cdef Py_ssize_t n = src.shape[0]
    cdef int d = <int>src.shape[1]
    out_u = np.zeros((n, d, d))
    out_v = np.zeros((n, d, d))
    out_s = np.zeros((n, d))
    out_ok = np.ones(n, dtype=bool)
    cdef double[:, :, ::1] u_view = out_u
    cdef double[:, :, ::1] v_view = out_v
    cdef double[:, ::1] s_view = out_s
    cdef cnp.uint8_t[::1] ok_view = out_ok.view(np.uint8)
    cdef double[:, ::1] a = np.zeros((d, d))
    cdef double[:, ::1] v = np.zeros((d, d))
    cdef double[::1] norms = np.zeros(d)
    cdef long[::1] order = np.zeros(d, dtype=np.int_)
    cdef Py_ssize_t k
    cdef int i, j, r, e, best, tmp, exponent
    cdef double big, scale, nrm
    with nogil:
        for k in range(n):
            big = 0.0
            for i in range(d):
                for j in range(d):
                    if fabs(src[k, i, j]) > big:
                        big = fabs(src[k, i, j])
            # power-of-two scaling keeps squared norms away from overflow
            frexp(big, &exponent)
            scale = ldexp(1.0, -exponent)
            for i in range(d):
                for j in range(d):
                    a[i, j] = src[k, i, j] * scale
                    v[i, j] = 1.0 if i == j else 0.0
            if _jacobi_one(a, v, d, tol, max_sweeps) < 0:
                ok_view[k] = 0
            for j in range(d):
                nrm = 0.0
                for r in range(d):
                    nrm += a[r, j] * a[r, j]
                norms[j] = sqrt(nrm)
                order[j] = j
            # selection sort by decreasing norm, stable for ties
            for i in range(d):
                best = i
                for j in range(i + 1, d):
                    if norms[order[j]] > norms[order[best]]:
                        best = j
                if best != i:
                    tmp = order[best]
                    for j in range(best, i, -1):
                        order[j] = order[j - 1]
                    order[i] = tmp
            for i in range(d):
                j = order[i]
                s_view[k, i] = log(norms[j]) + exponent * 0.6931471805599453
                for r in range(d):
                    v_view[k, r, i] = v[r, j]
                    if norms[j] > 0:
                        u_view[k, r, i] = a[r, j] / norms[j]
    return out_u, out_s, out_v, out_ok
