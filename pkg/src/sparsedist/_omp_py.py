"""Pure numpy batch OMP kernel (fallback when the compiled core is absent).

Implements error-constrained orthogonal matching pursuit over many signals
at once, working from the dictionary Gram matrix and the atom/signal inner
products so the inner loop never touches the signal dimension. The compiled
kernel in _omp_c.pyx implements the identical algorithm.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

# Newly selected atom is rejected (and pursuit stops) when its squared
# distance to the span of the current support falls below this.
RANK_TOL = 1e-10


def batch_omp_gram(
    G: np.ndarray,
    alpha0T: np.ndarray,
    norms_sq: np.ndarray,
    eps: float,
    max_atoms: int,
):
    """Run OMP on every signal described by a row of alpha0T = (D^T B)^T.

    Parameters
    ----------
    G : (n, n) Gram matrix D^T D of the unit-norm dictionary.
    alpha0T : (k, n) inner products of each signal with all atoms.
    norms_sq : (k,) squared l2 norms of the signals.
    eps : relative residual tolerance; pursuit of a column stops once
        ||r||^2 <= eps^2 * ||b||^2.
    max_atoms : hard cap on the support size per column.

    Returns
    -------
    counts : (k,) int64 support sizes.
    idx : (k, max_atoms) int64 selected atom indices, in selection order.
    coef : (k, max_atoms) float64 matching least-squares coefficients.
    """
    k, n = alpha0T.shape
    counts = np.zeros(k, dtype=np.int64)
    idx = np.zeros((k, max_atoms), dtype=np.int64)
    coef = np.zeros((k, max_atoms), dtype=np.float64)
    L = np.empty((max_atoms, max_atoms), dtype=np.float64)

    for j in range(k):
        a0 = alpha0T[j]
        n2 = float(norms_sq[j])
        if n2 <= 0.0:
            continue
        tol2 = eps * eps * n2
        stall = 1e-14 * np.sqrt(n2)
        c = a0.copy()
        S = idx[j]
        t = 0
        res2 = n2
        x = None
        while res2 > tol2 and t < max_atoms:
            best = int(np.argmax(np.abs(c)))
            if abs(c[best]) <= stall:
                break
            if t > 0:
                w = solve_triangular(
                    L[:t, :t], G[S[:t], best], lower=True, check_finite=False
                )
                d2 = G[best, best] - w @ w
                if d2 <= RANK_TOL:
                    break
                L[t, :t] = w
            else:
                d2 = G[best, best]
                if d2 <= RANK_TOL:
                    break
            L[t, t] = np.sqrt(d2)
            S[t] = best
            t += 1
            aS = a0[S[:t]]
            y = solve_triangular(L[:t, :t], aS, lower=True, check_finite=False)
            x = solve_triangular(L[:t, :t].T, y, lower=False, check_finite=False)
            res2 = max(n2 - x @ aS, 0.0)
            c = a0 - G[:, S[:t]] @ x
            c[S[:t]] = 0.0
        counts[j] = t
        if t > 0:
            coef[j, :t] = x
    return counts, idx, coef
