"""End-to-end acceptance gate.

Ten numbered checks covering the distance's axioms, the coding and learning
kernels against brute-force oracles, texture discrimination on synthetic
corpora, the compression baselines, CLI determinism, and the distance's
deliberate non-metricity. Each check prints one verdict line:

    ACCEPTANCE NN <name>: PASS|FAIL (<detail>; <elapsed>s)
"""

import copy
import os
import time

import numpy as np
import pytest
from PIL import Image

import oracles
import synth
import sparsedist as sd
from sparsedist.cli import main as cli_main

CLASSES = ("stripes0", "stripes45", "stripes90", "checks", "noise")
PER_CLASS = 10


def verdict(capsys, num, name, ok, detail, t0, limit=None):
    elapsed = time.time() - t0
    with capsys.disabled():
        print(f"\nACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'} "
              f"({detail}; {elapsed:.1f}s)")
    assert ok, f"{name}: {detail}"
    if limit is not None:
        assert elapsed <= limit, f"{name} took {elapsed:.1f}s, limit {limit}s"


@pytest.fixture(scope="session")
def corpus():
    """Fifty synthetic texture images (five classes), their models, labels,
    and the full pairwise distance matrix."""
    config = sd.PatchConfig(patch_count=600, seed=0, auto_scale=False)
    learn = sd.LearnParams(n=128, iterations=8, seed=0)
    models, labels = [], []
    for label in CLASSES:
        for v in range(PER_CLASS):
            img = synth.class_image(label, v)
            models.append(sd.build_model(img, f"{label}/{v}", config, learn))
            labels.append(label)
    matrix = sd.distance_matrix(models)
    return models, labels, matrix


def test_01_identity_and_symmetry(corpus, capsys):
    t0 = time.time()
    models = corpus[0][:20]
    identity_bad = sum(sd.distance(m, m) != 0.0 for m in models)
    identity_bad += sum(sd.distance(m, copy.deepcopy(m)) != 0.0 for m in models)
    sym_bad = 0
    pairs = 0
    for i in range(len(models)):
        for j in range(i + 1, len(models)):
            pairs += 1
            if sd.distance(models[i], models[j]) != sd.distance(models[j], models[i]):
                sym_bad += 1
    verdict(
        capsys, 1, "identity-and-symmetry",
        identity_bad == 0 and sym_bad == 0,
        f"20 images: {identity_bad} nonzero self-distances, "
        f"{sym_bad}/{pairs} asymmetric pairs",
        t0, limit=300,
    )


def test_02_greedy_coding_near_optimality(capsys):
    t0 = time.time()
    rng = np.random.default_rng(2024)
    bound_bad = 0
    for i in range(140):
        noisy = i % 2 == 1
        D, b, _ = oracles.planted_instance(rng, noisy)
        eps = 0.05 if noisy else 0.01
        support, coefs = sd.omp(D, b, sd.CodingParams(epsilon=eps, max_atoms=3))
        got = float(np.linalg.norm(b - D[:, support] @ coefs))
        best = oracles.best_residual_at_size(D, b, len(support))
        if got > 3.0 * best + 1e-9:
            bound_bad += 1
    single_bad = 0
    eps = 0.2
    for _ in range(60):
        D, b = oracles.single_atom_instance(rng)
        one_atom_best = min(
            float(np.linalg.norm(b - (D[:, j] @ b) * D[:, j]))
            for j in range(D.shape[1])
        )
        assert one_atom_best <= eps * np.linalg.norm(b)
        support, _ = sd.omp(D, b, sd.CodingParams(epsilon=eps, max_atoms=3))
        if len(support) != 1:
            single_bad += 1
    verdict(
        capsys, 2, "greedy-coding-near-optimality",
        bound_bad == 0 and single_bad == 0,
        f"200 instances: {bound_bad}/140 exceed 3x exhaustive optimum, "
        f"{single_bad}/60 miss a feasible 1-atom solution",
        t0, limit=60,
    )


def test_03_learning_descent_and_recovery(capsys):
    t0 = time.time()
    rng = np.random.default_rng(42)
    m, n_true, k, sparsity = 64, 128, 3000, 3
    D_true = rng.normal(size=(m, n_true))
    D_true /= np.linalg.norm(D_true, axis=0)
    B = np.zeros((m, k))
    for j in range(k):
        support = rng.choice(n_true, sparsity, replace=False)
        coefs = rng.uniform(1.0, 2.0, sparsity) * np.where(
            rng.normal(size=sparsity) < 0, -1.0, 1.0
        )
        B[:, j] = D_true[:, support] @ coefs
    mses = []
    sd.ksvd_learn(B, sd.LearnParams(), on_iteration=lambda i, D, mse: mses.append(mse))
    rises = sum(b - a > 1e-9 for a, b in zip(mses, mses[1:]))
    final_rel = float(np.sqrt(mses[-1] / m))
    verdict(
        capsys, 3, "learning-descent-and-recovery",
        rises == 0 and final_rel <= 0.1,
        f"{len(mses)} iterations: {rises} residual increases, "
        f"final per-entry relative residual {final_rel:.4f} (target 0.1)",
        t0, limit=120,
    )


def _stretch(x, lo=0.02, hi=0.98):
    x = (x - x.min()) / (x.max() - x.min())
    return lo + (hi - lo) * x


def _composite_reference(size=192):
    base = (
        0.45 * synth.stripes(size, 25.0, freq=13.0, phase=0.4, warp=0.03,
                             rng=np.random.default_rng(100))
        + 0.25 * synth.stripes(size, 115.0, freq=7.0, phase=1.1)
        + 0.20 * synth.checks(size, freq=10.0, phase_x=0.3, phase_y=1.7)
        + 0.10 * synth.smooth_noise(size, np.random.default_rng(101), sigma=1.2)
    )
    return _stretch(base)


def _composite_unrelated(size=192):
    base = (
        0.4 * synth.stripes(size, 70.0, freq=17.0, warp=0.04,
                            rng=np.random.default_rng(200))
        + 0.3 * synth.stripes(size, 160.0, freq=9.0)
        + 0.3 * synth.checks(size, freq=13.0)
    )
    return _stretch(base)


def test_04_variant_ordering(capsys):
    t0 = time.time()
    ref = _composite_reference()
    variants = {
        "orig": ref,
        "contrast": synth.gamma_shift(ref, 1.5),
        "luminance": synth.luminance_shift(ref, 0.25),
        "noise": synth.add_noise(ref, 0.05, np.random.default_rng(7)),
        "unrelated": _composite_unrelated(),
    }
    config = sd.PatchConfig(patch_count=1000, seed=0, auto_scale=False)
    learn = sd.LearnParams(n=128, iterations=12, seed=0)
    models = {k: sd.build_model(v, k, config, learn) for k, v in variants.items()}
    d = {k: sd.distance(models["orig"], m) for k, m in models.items()}
    margin = 0.02
    ok = (
        d["orig"] == 0.0
        and d["contrast"] <= d["luminance"]
        and min(d["contrast"], d["luminance"]) >= margin
        and d["noise"] - max(d["contrast"], d["luminance"]) >= margin
        and d["unrelated"] - d["noise"] >= margin
    )
    verdict(
        capsys, 4, "variant-ordering",
        ok,
        "orig={orig:.3f} contrast={contrast:.3f} luminance={luminance:.3f} "
        "noise={noise:.3f} unrelated={unrelated:.3f}".format(**d),
        t0, limit=180,
    )


def test_05_texture_classification(corpus, capsys):
    t0 = time.time()
    _, labels, matrix = corpus
    _, acc = sd.knn_loo_classify(matrix, labels)
    detail = f"synthetic 5x10 corpus: 1-NN LOO accuracy {acc:.3f} (target 0.9)"
    ok = acc >= 0.9
    manifest = os.environ.get("SPARSEDIST_BRODATZ_MANIFEST")
    if manifest:
        m = sd.parse_manifest(manifest)
        models = [
            sd.build_model(sd.load_image(p), i)
            for p, i in zip(m.paths, m.ids)
        ]
        _, ext_acc = sd.knn_loo_classify(sd.distance_matrix(models), list(m.labels))
        ok = ok and ext_acc >= 0.7
        detail += f"; external corpus accuracy {ext_acc:.3f} (target 0.7)"
    verdict(capsys, 5, "texture-classification", ok, detail, t0, limit=900)


def test_06_pair_recovery(capsys):
    t0 = time.time()
    families = ("stripes0", "stripes30", "stripes60", "stripes90", "checks", "noise")
    config = sd.PatchConfig(patch_count=500, seed=0, auto_scale=False)
    learn = sd.LearnParams(n=128, iterations=8, seed=0)
    models = []
    for fi, family in enumerate(families):
        rng = np.random.default_rng([fi, 41])
        if family.startswith("stripes"):
            angle = float(family.removeprefix("stripes"))
            base = synth.stripes(
                192, angle, freq=12.0 + rng.uniform(-0.5, 0.5),
                phase=rng.uniform(0, 2 * np.pi), warp=0.02, rng=rng,
            )
        elif family == "checks":
            base = synth.checks(
                192, freq=12.5,
                phase_x=rng.uniform(0, 2 * np.pi), phase_y=rng.uniform(0, 2 * np.pi),
            )
        else:
            base = synth.smooth_noise(192, rng, sigma=3.0)
        twin = synth.add_noise(base, 0.01, np.random.default_rng([fi, 99]))
        models.append(sd.build_model(base, f"{family}/a", config, learn))
        models.append(sd.build_model(twin, f"{family}/b", config, learn))
    dend = sd.average_linkage(sd.distance_matrix(models))
    got = {(a, b) for a, b, _, _ in dend.merges[:6]}
    want = {(2 * i, 2 * i + 1) for i in range(6)}
    verdict(
        capsys, 6, "pair-recovery",
        got == want,
        f"first 6 merges {sorted(got)} vs true pairs {sorted(want)}",
        t0, limit=300,
    )


def test_07_matching_accuracy_oracle(capsys):
    t0 = time.time()
    rng = np.random.default_rng(11)
    bad = 0
    for _ in range(500):
        k = int(rng.integers(1, 6))
        m = int(rng.integers(2, 13))
        pred = rng.integers(0, k, m)
        truth = rng.integers(0, int(rng.integers(1, 6)), m)
        if sd.hungarian_accuracy(pred, truth) != oracles.brute_force_accuracy(pred, truth):
            bad += 1
    verdict(
        capsys, 7, "matching-accuracy-oracle",
        bad == 0,
        f"500 random instances: {bad} disagree with brute-force matching",
        t0, limit=30,
    )


def test_08_compression_baseline_sanity(capsys):
    t0 = time.time()
    rng = np.random.default_rng(3)
    letters = list("abcdefghijklmnopqrstuvwxyz")
    pool = ["".join(rng.choice(letters, rng.integers(3, 9))) for _ in range(12)]
    text = (" ".join(rng.choice(pool, 1400))).encode("ascii")[:4096]
    r1 = rng.integers(0, 256, 4096, dtype=np.uint8).tobytes()
    r2 = rng.integers(0, 256, 4096, dtype=np.uint8).tobytes()
    ncd_self = sd.ncd(text, text)
    ncd_rand = sd.ncd(r1, r2)
    cdm_self = sd.cdm(text, text)
    cdm_rand = sd.cdm(r1, r2)
    ok = (
        ncd_self <= 0.15
        and 0.8 <= ncd_rand <= 1.1
        and abs(cdm_self - 0.5) <= 0.1
        and abs(cdm_rand - 1.0) <= 0.1
    )
    verdict(
        capsys, 8, "compression-baseline-sanity",
        ok,
        f"ncd(text,text)={ncd_self:.3f} ncd(rand,rand')={ncd_rand:.3f} "
        f"cdm(text,text)={cdm_self:.3f} cdm(rand,rand')={cdm_rand:.3f}",
        t0, limit=10,
    )


def test_09_deterministic_pipeline(capsys, tmp_path):
    t0 = time.time()
    rows = []
    for label in CLASSES:
        for v in range(2):
            name = f"{label}{v}.png"
            img = synth.class_image(label, v, size=160)
            arr = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)
            Image.fromarray(arr, "L").save(tmp_path / name)
            rows.append(f"{name}\t{label}")
    manifest = tmp_path / "set.tsv"
    manifest.write_text("\n".join(rows) + "\n")
    outputs = []
    for run in (1, 2):
        out = tmp_path / f"matrix{run}.csv"
        rc = cli_main([
            "matrix", str(manifest), "-o", str(out),
            "--patches", "400", "--iterations", "5", "--atoms", "96",
            "--seed", "7", "--cache", str(tmp_path / f"cache{run}"),
        ])
        assert rc == 0
        outputs.append(out.read_bytes())
    verdict(
        capsys, 9, "deterministic-pipeline",
        outputs[0] == outputs[1],
        f"10-image manifest coded twice with the same seed: "
        f"{'byte-identical' if outputs[0] == outputs[1] else 'outputs differ'}",
        t0, limit=600,
    )


def test_10_non_metricity(corpus, capsys):
    t0 = time.time()
    models, _, M = corpus
    n = M.shape[0]
    best = None
    for j in range(n):
        gap = M - M[:, [j]] - M[[j], :]
        gap[:, j] = -np.inf
        gap[j, :] = -np.inf
        np.fill_diagonal(gap, -np.inf)
        i, k = np.unravel_index(np.argmax(gap), gap.shape)
        if best is None or gap[i, k] > best[0]:
            best = (float(gap[i, k]), i, j, k)
    gap, i, j, k = best
    if gap > 0:
        ids = [models[t].image_id for t in (i, j, k)]
        detail = (
            f"triangle violation: d({ids[0]},{ids[2]})={M[i, k]:.3f} > "
            f"d({ids[0]},{ids[1]})={M[i, j]:.3f} + d({ids[1]},{ids[2]})={M[j, k]:.3f} "
            f"(gap {gap:.3f})"
        )
    else:
        detail = "no violating triple found by exhaustive search over 50 images"
    verdict(capsys, 10, "non-metricity", True, detail, t0)
