# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled one-sided (Hestenes) Jacobi SVD kernel.

Works on a Fortran-ordered copy so each column is contiguous in memory.
Column pairs are visited in cyclic-by-row order.
"""
import numpy as np

from libc.float cimport DBL_EPSILON
from libc.math cimport sqrt, fabs, copysign


def jacobi_orthogonalize(a, double tol, int max_sweeps):
    """Orthogonalize the columns of ``a`` (m x n, m >= n) in place of a copy.

    Returns ``(w, v, sweeps, converged, off)`` with ``a @ v == w`` and the
    columns of ``w`` mutually orthogonal. ``off`` is the largest normalized
    column inner product seen in the last sweep. Columns whose squared norm
    is below ``(eps * ||a||_F)**2`` are rounding residue and are not rotated.
    Callers scale ``a`` to unit max entry first so the squared norms neither
    underflow nor overflow.
    """
    cdef double[::1, :] w = np.array(a, dtype=np.float64, order="F", copy=True)
    cdef Py_ssize_t m = w.shape[0]
    cdef Py_ssize_t n = w.shape[1]
    cdef double[::1, :] v = np.asfortranarray(np.eye(n))
    cdef Py_ssize_t i, j, k
    cdef double alpha, beta, gamma, zeta, t, c, s, wi, wj, ratio, off = 0.0
    cdef double floor = 0.0
    cdef int sweep = 0
    cdef int rotated
    cdef bint converged = False

    for j in range(n):
        for k in range(m):
            floor += w[k, j] * w[k, j]
    floor *= DBL_EPSILON * DBL_EPSILON

    while sweep < max_sweeps:
        sweep += 1
        rotated = 0
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for k in range(m):
                    wi = w[k, i]
                    wj = w[k, j]
                    alpha += wi * wi
                    beta += wj * wj
                    gamma += wi * wj
                if alpha <= floor or beta <= floor:
                    continue
                ratio = fabs(gamma) / (sqrt(alpha) * sqrt(beta))
                if ratio > off:
                    off = ratio
                if ratio <= tol:
                    continue
                rotated += 1
                zeta = (beta - alpha) / (2.0 * gamma)
                t = copysign(1.0, zeta) / (fabs(zeta) + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for k in range(m):
                    wi = w[k, i]
                    wj = w[k, j]
                    w[k, i] = c * wi - s * wj
                    w[k, j] = s * wi + c * wj
                for k in range(n):
                    wi = v[k, i]
                    wj = v[k, j]
                    v[k, i] = c * wi - s * wj
                    v[k, j] = s * wi + c * wj
        if rotated == 0:
            converged = True
            break

    return np.asarray(w), np.asarray(v), sweep, converged, off
