"""Dictionary learning: determinism, residual descent, planted recovery,
and the on-disk dictionary format."""

import numpy as np
import pytest

import sparsedist as sd
from sparsedist.errors import ParameterError


def planted_patches(rng, m, n_true, k, sparsity):
    """Columns that are exact sparse combinations of a random dictionary."""
    D = rng.normal(size=(m, n_true))
    D /= np.linalg.norm(D, axis=0)
    B = np.zeros((m, k))
    for j in range(k):
        support = rng.choice(n_true, sparsity, replace=False)
        coefs = rng.uniform(1.0, 2.0, sparsity) * np.where(
            rng.normal(size=sparsity) < 0, -1.0, 1.0
        )
        B[:, j] = D[:, support] @ coefs
    return B


def test_learn_is_deterministic():
    rng = np.random.default_rng(0)
    B = planted_patches(rng, 12, 18, 200, 2)
    params = sd.LearnParams(
        n=18, iterations=5, seed=3, coding=sd.CodingParams(epsilon=0.1, max_atoms=6)
    )
    D1 = sd.ksvd_learn(B, params)
    D2 = sd.ksvd_learn(B, params)
    assert D1.tobytes() == D2.tobytes()


def test_learned_dictionary_shape_and_norms():
    rng = np.random.default_rng(1)
    B = planted_patches(rng, 10, 16, 150, 2)
    D = sd.ksvd_learn(
        B,
        sd.LearnParams(
            n=16, iterations=4, seed=0, coding=sd.CodingParams(epsilon=0.1, max_atoms=5)
        ),
    )
    assert D.shape == (10, 16)
    assert np.all(np.isfinite(D))
    assert np.max(np.abs(np.linalg.norm(D, axis=0) - 1.0)) <= 1e-9


def test_residual_descends_and_recovers_planted_signals():
    rng = np.random.default_rng(42)
    B = planted_patches(rng, 16, 24, 500, 2)
    mses = []
    params = sd.LearnParams(
        n=24,
        iterations=15,
        seed=1,
        coding=sd.CodingParams(epsilon=0.1, max_atoms=8),
    )
    sd.ksvd_learn(B, params, on_iteration=lambda i, D, mse: mses.append((i, mse)))
    assert [i for i, _ in mses] == list(range(len(mses)))
    values = [mse for _, mse in mses]
    assert all(b - a <= 1e-9 for a, b in zip(values, values[1:]))
    assert values[-1] < values[0]
    # per-entry RMS of the final residual stays within the coding tolerance
    assert np.sqrt(values[-1] / 16) <= 0.1


def test_early_stop_on_plateau():
    rng = np.random.default_rng(2)
    # exactly n planted generators: learning has nothing left to improve
    B = planted_patches(rng, 8, 12, 12, 1)
    calls = []
    sd.ksvd_learn(
        B,
        sd.LearnParams(
            n=12, iterations=50, seed=0, coding=sd.CodingParams(epsilon=0.1, max_atoms=4)
        ),
        on_iteration=lambda i, D, mse: calls.append(mse),
    )
    assert len(calls) < 50


def test_dictionary_init_uses_distinct_columns():
    rng = np.random.default_rng(3)
    B = rng.normal(size=(6, 10))
    D = sd.dictionary_init(B, 10, seed=5)
    assert D.shape == (6, 10)
    normalized = B / np.linalg.norm(B, axis=0)
    # with n == k every column is used exactly once, in some order
    matches = np.isclose(
        normalized.T @ D, 1.0, atol=1e-12
    )
    assert matches.any(axis=0).all() and matches.any(axis=1).all()


def test_dictionary_init_rejects_too_few_columns():
    rng = np.random.default_rng(4)
    B = rng.normal(size=(6, 9))
    with pytest.raises(ParameterError):
        sd.dictionary_init(B, 10, seed=0)


def test_learn_rejects_undercomplete_target():
    rng = np.random.default_rng(5)
    B = rng.normal(size=(8, 50))
    with pytest.raises(ParameterError):
        sd.ksvd_learn(B, sd.LearnParams(n=8, iterations=2, seed=0))


def test_dictionary_file_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(6)
    D = rng.normal(size=(9, 14))
    D /= np.linalg.norm(D, axis=0)
    path = tmp_path / "dict.spdict"
    sd.save_dictionary(path, D)
    loaded = sd.load_dictionary(path)
    assert loaded.tobytes() == D.tobytes()


def test_dictionary_file_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.spdict"
    path.write_bytes(b"NOTDICT 1 2 3\n" + b"\x00" * 48)
    with pytest.raises(ParameterError):
        sd.load_dictionary(path)


def test_dictionary_file_rejects_truncation_and_trailing(tmp_path):
    rng = np.random.default_rng(7)
    D = rng.normal(size=(5, 8))
    D /= np.linalg.norm(D, axis=0)
    path = tmp_path / "dict.spdict"
    sd.save_dictionary(path, D)
    raw = path.read_bytes()

    short = tmp_path / "short.spdict"
    short.write_bytes(raw[:-8])
    with pytest.raises(ParameterError):
        sd.load_dictionary(short)

    long = tmp_path / "long.spdict"
    long.write_bytes(raw + b"\x00")
    with pytest.raises(ParameterError):
        sd.load_dictionary(long)
