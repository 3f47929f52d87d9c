# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch OMP kernel. Mirrors _omp_py.batch_omp_gram exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

cdef double RANK_TOL = 1e-10


def batch_omp_gram(double[:, ::1] G, double[:, ::1] alpha0T,
                   double[::1] norms_sq, double eps, int max_atoms):
    """Error-constrained OMP over all signals; alpha0T is (k, n) = (D^T B)^T.

    Returns (counts, idx, coef) with idx/coef in selection order, matching the
    pure numpy kernel's contract.
    """
    cdef Py_ssize_t n = G.shape[0]
    cdef Py_ssize_t k = alpha0T.shape[0]

    counts_arr = np.zeros(k, dtype=np.int64)
    idx_arr = np.zeros((k, max_atoms), dtype=np.int64)
    coef_arr = np.zeros((k, max_atoms), dtype=np.float64)
    cdef long long[::1] counts = counts_arr
    cdef long long[:, ::1] idx = idx_arr
    cdef double[:, ::1] coef = coef_arr

    L_arr = np.empty((max_atoms, max_atoms), dtype=np.float64)
    c_arr = np.empty(n, dtype=np.float64)
    w_arr = np.empty(max_atoms, dtype=np.float64)
    y_arr = np.empty(max_atoms, dtype=np.float64)
    x_arr = np.empty(max_atoms, dtype=np.float64)
    cdef double[:, ::1] L = L_arr
    cdef double[::1] c = c_arr
    cdef double[::1] w = w_arr
    cdef double[::1] y = y_arr
    cdef double[::1] x = x_arr

    cdef Py_ssize_t j, i, t, r, q, best
    cdef double n2, tol2, stall, res2, cmax, v, acc, d2

    with nogil:
        for j in range(k):
            n2 = norms_sq[j]
            if n2 <= 0.0:
                continue
            tol2 = eps * eps * n2
            stall = 1e-14 * sqrt(n2)
            for i in range(n):
                c[i] = alpha0T[j, i]
            t = 0
            res2 = n2
            while res2 > tol2 and t < max_atoms:
                best = -1
                cmax = -1.0
                for i in range(n):
                    v = fabs(c[i])
                    if v > cmax:
                        cmax = v
                        best = i
                if cmax <= stall:
                    break
                if t > 0:
                    for r in range(t):
                        acc = G[idx[j, r], best]
                        for q in range(r):
                            acc -= L[r, q] * w[q]
                        w[r] = acc / L[r, r]
                    d2 = G[best, best]
                    for r in range(t):
                        d2 -= w[r] * w[r]
                    if d2 <= RANK_TOL:
                        break
                    for r in range(t):
                        L[t, r] = w[r]
                else:
                    d2 = G[best, best]
                    if d2 <= RANK_TOL:
                        break
                L[t, t] = sqrt(d2)
                idx[j, t] = best
                t += 1
                # forward/back substitution: L L^T x = alpha0[S]
                for r in range(t):
                    acc = alpha0T[j, idx[j, r]]
                    for q in range(r):
                        acc -= L[r, q] * y[q]
                    y[r] = acc / L[r, r]
                for r in range(t - 1, -1, -1):
                    acc = y[r]
                    for q in range(r + 1, t):
                        acc -= L[q, r] * x[q]
                    x[r] = acc / L[r, r]
                res2 = n2
                for r in range(t):
                    res2 -= x[r] * alpha0T[j, idx[j, r]]
                if res2 < 0.0:
                    res2 = 0.0
                for i in range(n):
                    acc = alpha0T[j, i]
                    for r in range(t):
                        acc -= G[i, idx[j, r]] * x[r]
                    c[i] = acc
                for r in range(t):
                    c[idx[j, r]] = 0.0
            counts[j] = t
            for r in range(t):
                coef[j, r] = x[r]
    return counts_arr, idx_arr, coef_arr
