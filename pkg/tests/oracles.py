"""Shared brute-force oracles and instance generators for coding tests.

The greedy-vs-exhaustive checks need problem instances on which a greedy
pursuit is actually near-optimal.  For arbitrary dense signals a greedy
atom choice can be committed arbitrarily badly (no constant-factor bound
exists), so the generators below plant sparse signals whose support passes
a verifiable exact-recovery margin: max_{j not in S} ||pinv(D_S) d_j||_1 < 1
guarantees the greedy path stays inside S for any signal spanned by D_S.
"""

import itertools

import numpy as np


def best_residual_at_size(D, b, size):
    """Exhaustive minimum residual over all supports of exactly `size` atoms."""
    best = np.inf
    for combo in itertools.combinations(range(D.shape[1]), size):
        coef, *_ = np.linalg.lstsq(D[:, combo], b, rcond=None)
        best = min(best, float(np.linalg.norm(b - D[:, combo] @ coef)))
    return best


def recovery_margin(D, support):
    """max l1-norm of pinv(D_S) @ d_j over atoms j outside the support."""
    pinv = np.linalg.pinv(D[:, support])
    rest = [j for j in range(D.shape[1]) if j not in support]
    return max(float(np.abs(pinv @ D[:, j]).sum()) for j in rest)


def planted_instance(rng, noisy, margin=0.9, noise_level=0.02):
    """Random (D, b, size) with b sparse over a support that greedy recovers.

    Dictionaries, supports, signs and magnitudes are all random; supports
    failing the recovery margin are rejected and redrawn.  With `noisy` a
    2% off-support perturbation is added so the coded residual is nonzero.
    """
    while True:
        m = int(rng.integers(3, 7))
        n = int(rng.integers(m + 1, 11))
        size = int(rng.integers(1, min(3, m - 1) + 1))
        D = rng.normal(size=(m, n))
        D /= np.linalg.norm(D, axis=0)
        support = list(rng.choice(n, size, replace=False))
        if recovery_margin(D, support) >= margin:
            continue
        signs = np.where(rng.normal(size=size) < 0, -1.0, 1.0)
        x = (1.0 + rng.uniform(0.0, 1.0, size)) * signs
        b = D[:, support] @ x
        if noisy:
            noise = rng.normal(size=m)
            b = b + noise_level * np.linalg.norm(b) * noise / np.linalg.norm(noise)
        return D, b, size


def single_atom_instance(rng, slack=0.03):
    """Random (D, b) with a guaranteed 1-atom solution within 20% residual."""
    m = int(rng.integers(3, 7))
    n = int(rng.integers(m + 1, 11))
    D = rng.normal(size=(m, n))
    D /= np.linalg.norm(D, axis=0)
    j = int(rng.integers(n))
    scale = float(rng.uniform(0.5, 3.0))
    pert = rng.normal(size=m)
    pert /= np.linalg.norm(pert)
    b = scale * D[:, j] + slack * scale * pert
    return D, b


def brute_force_accuracy(pred, truth):
    """Best accuracy over all one-to-one cluster-to-class assignments."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    pvals = sorted(set(pred.tolist()))
    tvals = sorted(set(truth.tolist()))
    if len(pvals) <= len(tvals):
        best = 0
        for perm in itertools.permutations(tvals, len(pvals)):
            mapping = dict(zip(pvals, perm))
            best = max(best, sum(mapping[p] == t for p, t in zip(pred, truth)))
    else:
        best = 0
        for perm in itertools.permutations(pvals, len(tvals)):
            mapping = dict(zip(perm, tvals))
            best = max(
                best, sum(mapping.get(p) == t for p, t in zip(pred, truth))
            )
    return best / pred.size
