"""Greedy l0 sparse coding (OMP) and K-SVD dictionary learning.

Dictionaries are plain (m, n) float64 arrays with unit-norm columns and
n > m (overcomplete). Sparse codes keep one (support, coefficients) pair per
signal; supports are index-sorted.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import backends
from .errors import (
    DegenerateInputError,
    DimensionError,
    NumericError,
    ParameterError,
)
from .images import PatchMatrix

UNIT_NORM_TOL = 1e-9

# power iteration (rank-1 atom update)
POWER_TOL = 1e-10
POWER_MAX_STEPS = 1000

# K-SVD stops early once the mean squared residual improves less than this
EARLY_STOP_TOL = 1e-5


@dataclass(frozen=True)
class CodingParams:
    """OMP stopping rule: relative residual tolerance and a support-size cap."""

    epsilon: float = 0.1
    max_atoms: int = 32
    p: int = 0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.max_atoms < 1:
            raise ParameterError("max_atoms must be >= 1")
        if self.p not in (0, 1):
            raise ParameterError(f"p must be 0 or 1, got {self.p}")

    def require_supported(self):
        # l1 coding is declared in the interface but not implemented here
        if self.p == 1:
            raise ParameterError("p=1 (l1) coding is not available in this release")


@dataclass(frozen=True)
class LearnParams:
    """K-SVD problem size and iteration budget."""

    n: int = 128
    iterations: int = 30
    seed: int = 0
    coding: CodingParams = field(default_factory=CodingParams)

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("atom count n must be >= 2")
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")


@dataclass
class SparseCode:
    """Per-signal sparse representations over an n-atom dictionary."""

    n: int
    cols: list[tuple[np.ndarray, np.ndarray]]

    @property
    def k(self) -> int:
        return len(self.cols)

    def support_sizes(self) -> np.ndarray:
        return np.array([len(s) for s, _ in self.cols], dtype=np.int64)

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.k), dtype=np.float64)
        for j, (support, coefs) in enumerate(self.cols):
            A[support, j] = coefs
        return A

    def validate(self, max_atoms: int | None = None):
        for support, coefs in self.cols:
            if len(support) != len(coefs):
                raise DimensionError("support/coefficient length mismatch")
            if max_atoms is not None and len(support) > max_atoms:
                raise ParameterError("support larger than max_atoms")
            if len(support) and (
                support.min() < 0
                or support.max() >= self.n
                or np.any(np.diff(support) <= 0)
            ):
                raise ParameterError("support must be strictly increasing in [0, n)")


def check_dictionary(D: np.ndarray) -> np.ndarray:
    """Validate overcompleteness, finiteness and unit column norms."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2:
        raise DimensionError("dictionary must be a 2-D (m, n) array")
    m, n = D.shape
    if n <= m:
        raise DimensionError(f"dictionary must be overcomplete (n > m), got m={m} n={n}")
    if not np.all(np.isfinite(D)):
        raise NumericError("dictionary contains non-finite entries")
    norms = np.linalg.norm(D, axis=0)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        raise ParameterError("dictionary columns must have unit l2 norm")
    return D


def _as_columns(patches) -> np.ndarray:
    if isinstance(patches, PatchMatrix):
        return patches.columns
    arr = np.asarray(patches, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError("patches must be a 2-D column matrix")
    return arr


def _code_columns(D: np.ndarray, B: np.ndarray, params: CodingParams):
    """Run the active OMP kernel; returns raw (counts, idx, coef) in selection order."""
    params.require_supported()
    m, n = D.shape
    if B.shape[0] != m:
        raise DimensionError(
            f"signal dimension {B.shape[0]} does not match dictionary m={m}"
        )
    if params.max_atoms > m:
        raise ParameterError(f"max_atoms must be <= m={m}")
    if not np.all(np.isfinite(B)):
        raise NumericError("signals contain non-finite entries")
    G = np.ascontiguousarray(D.T @ D)
    alpha0T = np.ascontiguousarray(B.T @ D)
    norms_sq = np.einsum("ij,ij->j", B, B)
    return backends.batch_omp_gram(G, alpha0T, norms_sq, params.epsilon, params.max_atoms)


def _to_sparse_code(n: int, counts, idx, coef) -> SparseCode:
    cols = []
    for j in range(len(counts)):
        t = counts[j]
        support = idx[j, :t]
        order = np.argsort(support)
        cols.append((support[order].copy(), coef[j, :t][order].copy()))
    return SparseCode(n=n, cols=cols)


def omp(D: np.ndarray, signal: np.ndarray, params: CodingParams):
    """Orthogonal matching pursuit for one signal.

    Greedily selects the atom best correlated with the residual (ties to the
    lowest index), refits least squares on the support, and stops when the
    residual drops to epsilon * ||signal|| or the support hits max_atoms.
    Returns (support, coefficients) with the support index-sorted.
    """
    D = check_dictionary(D)
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.shape[0] != D.shape[0]:
        raise DimensionError(
            f"signal must be a length-{D.shape[0]} vector, got shape {signal.shape}"
        )
    counts, idx, coef = _code_columns(D, signal[:, None], params)
    code = _to_sparse_code(D.shape[1], counts, idx, coef)
    return code.cols[0]


def batch_code(D: np.ndarray, patches, params: CodingParams) -> SparseCode:
    """Code every patch column independently against a fixed dictionary."""
    D = check_dictionary(D)
    B = _as_columns(patches)
    counts, idx, coef = _code_columns(D, B, params)
    return _to_sparse_code(D.shape[1], counts, idx, coef)


def dictionary_init(patches, n: int, seed: int) -> np.ndarray:
    """Seed a dictionary with n distinct random patch columns, unit-normalized."""
    B = _as_columns(patches)
    k = B.shape[1]
    if k < n:
        raise ParameterError(f"need at least n={n} patches to initialize, got k={k}")
    rng = np.random.default_rng(seed)
    picks = rng.choice(k, size=n, replace=False)
    D = B[:, picks].copy()
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms == 0):
        raise DegenerateInputError("zero-norm patch column cannot seed an atom")
    return D / norms


def _dominant_singular(E: np.ndarray, init: np.ndarray):
    """Dominant singular triple of E by alternating power iteration.

    Warm-started at `init` (the current atom), which guarantees the rank-1
    update never increases the restricted residual.
    """
    u = init / np.linalg.norm(init)
    sigma_prev = 0.0
    for _ in range(POWER_MAX_STEPS):
        v = E.T @ u
        vn = np.linalg.norm(v)
        if vn == 0.0:
            # init orthogonal to the column space; restart from the strongest column
            u = E[:, int(np.argmax(np.einsum("ij,ij->j", E, E)))]
            u = u / np.linalg.norm(u)
            v = E.T @ u
            vn = np.linalg.norm(v)
        v /= vn
        u_raw = E @ v
        sigma = float(np.linalg.norm(u_raw))
        u = u_raw / sigma
        if abs(sigma - sigma_prev) <= POWER_TOL * max(1.0, sigma):
            break
        sigma_prev = sigma
    # canonical sign: largest-magnitude entry of the atom is positive
    pivot = int(np.argmax(np.abs(u)))
    if u[pivot] < 0:
        u = -u
        v = -v
    return u, sigma, v


def ksvd_learn(patches, params: LearnParams, on_iteration=None) -> np.ndarray:
    """Learn an overcomplete dictionary by alternating OMP coding and
    sequential rank-1 atom updates.

    Each update replaces an atom with the dominant left singular direction of
    the residual restricted to the columns using it, letting those columns'
    coefficients change along. Atoms used by no column are reseeded from the
    currently worst-represented patch. Runs params.iterations times, stopping
    early once the mean squared residual improves by less than 1e-5.

    The mean squared residual never increases from one iteration to the next:
    recoding keeps the previous iteration's code for any column where the
    fresh greedy code would be worse (both are valid under the current
    dictionary, since coding happens before atoms move), and each rank-1 atom
    update is warm-started so it cannot increase the residual it touches.

    on_iteration, if given, is called as on_iteration(i, D, mse) after each
    iteration's update sweep.
    """
    B = _as_columns(patches)
    m, k = B.shape
    if params.n <= m:
        raise ParameterError(
            f"dictionary must be overcomplete: n={params.n} <= patch dim m={m}"
        )
    params.coding.require_supported()
    D = dictionary_init(B, params.n, params.seed)
    n = params.n
    prev_mse = np.inf
    A_prev = None
    res_sq_prev = None

    for it in range(params.iterations):
        counts, idx, coef = _code_columns(D, B, params.coding)
        A = np.zeros((n, k))
        for j in range(k):
            A[idx[j, : counts[j]], j] = coef[j, : counts[j]]
        R = B - D @ A
        if A_prev is not None:
            res_sq = np.einsum("ij,ij->j", R, R)
            worse = res_sq > res_sq_prev
            if np.any(worse):
                A[:, worse] = A_prev[:, worse]
                R[:, worse] = B[:, worse] - D @ A_prev[:, worse]

        reseeded: list[int] = []
        for a in range(n):
            omega = np.nonzero(A[a])[0]
            if omega.size == 0:
                res_sq = np.einsum("ij,ij->j", R, R)
                if reseeded:
                    res_sq[reseeded] = -1.0
                worst = int(np.argmax(res_sq))
                col = B[:, worst]
                D[:, a] = col / np.linalg.norm(col)
                reseeded.append(worst)
                continue
            E = R[:, omega] + np.outer(D[:, a], A[a, omega])
            if np.linalg.norm(E) <= 1e-12:
                # nothing left for this atom to represent
                A[a, omega] = 0.0
                R[:, omega] = E
                continue
            u, sigma, v = _dominant_singular(E, init=D[:, a])
            D[:, a] = u
            A[a, omega] = sigma * v
            R[:, omega] = E - np.outer(u, sigma * v)

        mse = float(np.einsum("ij,ij->", R, R)) / k
        if on_iteration is not None:
            on_iteration(it, D.copy(), mse)
        if prev_mse - mse < EARLY_STOP_TOL:
            break
        prev_mse = mse
        A_prev = A
        res_sq_prev = np.einsum("ij,ij->j", R, R)
    return D


def save_dictionary(path, D: np.ndarray):
    """Write the SPDICT format: ASCII header, then column-major little-endian f64."""
    D = check_dictionary(D)
    m, n = D.shape
    header = f"SPDICT 1 {m} {n}\n".encode("ascii")
    payload = D.astype("<f8").tobytes(order="F")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)


def load_dictionary(path) -> np.ndarray:
    """Read an SPDICT file; round-trips save_dictionary bit-exactly."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        parts = header.split()
        if len(parts) != 4 or parts[0] != "SPDICT" or parts[1] != "1":
            raise ParameterError(f"not an SPDICT v1 file: header {header!r}")
        m, n = int(parts[2]), int(parts[3])
        payload = fh.read(m * n * 8 + 1)
    if len(payload) != m * n * 8:
        raise ParameterError("SPDICT payload size does not match header")
    D = np.frombuffer(payload, dtype="<f8").reshape((m, n), order="F")
    return check_dictionary(D.astype(np.float64))
