"""Benchmark the compiled coding kernel against the pure-numpy fallback.

Codes one planted batch with both backends, checks they agree, and reports
wall time and speedup. Run with:  python benchmarks/bench_omp.py
"""

import time

import numpy as np

import sparsedist as sd
from sparsedist import backends


def planted_batch(rng, m, n, k, sparsity):
    D = rng.normal(size=(m, n))
    D /= np.linalg.norm(D, axis=0)
    B = np.zeros((m, k))
    for j in range(k):
        support = rng.choice(n, sparsity, replace=False)
        B[:, j] = D[:, support] @ rng.normal(size=sparsity)
    B += 0.01 * rng.normal(size=B.shape)
    return D, B


def time_backend(name, D, B, params, repeats):
    previous = backends.set_backend(name)
    try:
        code = sd.batch_code(D, B, params)  # warm-up
        best = np.inf
        for _ in range(repeats):
            start = time.perf_counter()
            sd.batch_code(D, B, params)
            best = min(best, time.perf_counter() - start)
        return best, code
    finally:
        backends.set_backend(previous)


def main():
    rng = np.random.default_rng(0)
    m, n, k = 64, 128, 3000
    D, B = planted_batch(rng, m, n, k, sparsity=4)
    params = sd.CodingParams(epsilon=0.1, max_atoms=32)
    repeats = 3

    print(f"coding {k} signals, m={m}, n={n}, max_atoms={params.max_atoms}")
    t_py, code_py = time_backend("python", D, B, params, repeats)
    print(f"  python: {t_py * 1000:8.1f} ms")
    if not backends.HAVE_C:
        print("  compiled backend not built; skipping comparison")
        return

    t_c, code_c = time_backend("c", D, B, params, repeats)
    print(f"  c:      {t_c * 1000:8.1f} ms")
    print(f"  speedup: {t_py / t_c:.1f}x")

    mismatched = sum(
        not (np.array_equal(s1, s2) and np.allclose(c1, c2, rtol=0, atol=1e-10))
        for (s1, c1), (s2, c2) in zip(code_py.cols, code_c.cols)
    )
    if mismatched:
        raise SystemExit(f"backends disagree on {mismatched}/{k} signals")
    print(f"  backends agree on all {k} signals")


if __name__ == "__main__":
    main()
