"""Command-line interface.

Subcommands:
  model     learn one image's dictionary and write it as an SPDICT file
  dist      distance between two images (sparse or compression based)
  matrix    pairwise distance matrix over a manifest, written as CSV
  cluster   spectral + average-linkage clustering accuracy from a matrix
  classify  leave-one-out nearest-neighbor accuracy from a matrix
  retrieve  ranked neighbors for one query, or precision/recall per query

Exit codes: 0 success, 1 runtime error, 2 degenerate input or usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .compression import (
    DEFAULT_COMPRESSOR,
    cdm,
    compression_distance_matrix,
    compressor_names,
    image_bytes,
    ncd,
)
from .distance import (
    ImageModel,
    build_model,
    distance,
    distance_matrix,
    read_distance_csv,
    write_distance_csv,
)
from .errors import DegenerateInputError, ParameterError, SparseDistError
from .evaluation import (
    average_linkage,
    hungarian_accuracy,
    knn_loo_classify,
    parse_manifest,
    precision_recall,
    retrieve,
    spectral_cluster,
)
from .images import PatchConfig, load_image
from .sparse import CodingParams, LearnParams, save_dictionary

KIND_NAMES = {"ds": "d_S", "ncd": "ncd", "cdm": "cdm"}


def _default_seed() -> int:
    raw = os.environ.get("SPARSEDIST_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(f"SPARSEDIST_SEED must be an integer, got {raw!r}") from None


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--patch-side", type=int, default=8, help="square patch side length")
    p.add_argument("--patches", type=int, default=3000, help="patches sampled per image")
    p.add_argument("--atoms", type=int, default=128, help="dictionary atoms")
    p.add_argument("--epsilon", type=float, default=0.1, help="relative residual tolerance")
    p.add_argument("--max-atoms", type=int, default=32, help="per-patch support cap")
    p.add_argument("--iterations", type=int, default=30, help="dictionary learning iterations")
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (default: SPARSEDIST_SEED env var, else 0)")
    p.add_argument("--no-auto-scale", action="store_true",
                   help="skip detail-driven downscaling")
    p.add_argument("--cache", type=Path, default=None, metavar="DIR",
                   help="directory for cached image models")


def _configs(args) -> tuple[PatchConfig, LearnParams]:
    seed = args.seed if args.seed is not None else _default_seed()
    pc = PatchConfig(
        patch_side=args.patch_side,
        patch_count=args.patches,
        seed=seed,
        auto_scale=not args.no_auto_scale,
    )
    lp = LearnParams(
        n=args.atoms,
        iterations=args.iterations,
        seed=seed,
        coding=CodingParams(epsilon=args.epsilon, max_atoms=args.max_atoms),
    )
    return pc, lp


def _config_digest(pc: PatchConfig, lp: LearnParams) -> str:
    blob = json.dumps(
        {
            "patch_side": pc.patch_side,
            "patch_count": pc.patch_count,
            "energy_fraction": pc.energy_fraction,
            "seed": pc.seed,
            "auto_scale": pc.auto_scale,
            "candidate_scales": list(pc.candidate_scales),
            "n": lp.n,
            "iterations": lp.iterations,
            "learn_seed": lp.seed,
            "epsilon": lp.coding.epsilon,
            "max_atoms": lp.coding.max_atoms,
            "p": lp.coding.p,
        },
        sort_keys=True,
    ).encode("ascii")
    return hashlib.sha256(blob).hexdigest()[:16]


def _cached_model(path: Path, image_id: str, pc: PatchConfig, lp: LearnParams,
                  cache_dir: Path | None) -> ImageModel:
    if cache_dir is None:
        return build_model(load_image(path), image_id, pc, lp)
    content = hashlib.sha256(path.read_bytes()).hexdigest()[:24]
    entry = cache_dir / f"{content}-{_config_digest(pc, lp)}.npz"
    if entry.is_file():
        with np.load(entry) as data:
            return ImageModel(
                image_id=image_id,
                dictionary=data["dictionary"],
                patches=data["patches"],
                self_complexity=float(data["self_complexity"]),
                coding=lp.coding,
                scale=int(data["scale"]),
            )
    model = build_model(load_image(path), image_id, pc, lp)
    cache_dir.mkdir(parents=True, exist_ok=True)
    tmp = entry.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        np.savez(
            fh,
            dictionary=model.dictionary,
            patches=model.patches,
            self_complexity=model.self_complexity,
            scale=model.scale,
        )
    os.replace(tmp, entry)
    return model


def _model_task(payload):
    path, image_id, args_dict = payload
    pc = PatchConfig(**args_dict["pc"])
    lp = LearnParams(
        n=args_dict["n"],
        iterations=args_dict["iterations"],
        seed=args_dict["seed"],
        coding=CodingParams(epsilon=args_dict["epsilon"], max_atoms=args_dict["max_atoms"]),
    )
    cache = Path(args_dict["cache"]) if args_dict["cache"] else None
    return _cached_model(Path(path), image_id, pc, lp, cache)


def _build_models(manifest, pc: PatchConfig, lp: LearnParams, cache: Path | None,
                  jobs: int) -> list[ImageModel]:
    if jobs <= 1:
        return [
            _cached_model(p, i, pc, lp, cache)
            for p, i in zip(manifest.paths, manifest.ids)
        ]
    args_dict = {
        "pc": {
            "patch_side": pc.patch_side,
            "patch_count": pc.patch_count,
            "energy_fraction": pc.energy_fraction,
            "seed": pc.seed,
            "auto_scale": pc.auto_scale,
            "candidate_scales": tuple(pc.candidate_scales),
        },
        "n": lp.n,
        "iterations": lp.iterations,
        "seed": lp.seed,
        "epsilon": lp.coding.epsilon,
        "max_atoms": lp.coding.max_atoms,
        "cache": str(cache) if cache else None,
    }
    payloads = [(str(p), i, args_dict) for p, i in zip(manifest.paths, manifest.ids)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_model_task, payloads))


def _load_matrix_with_labels(matrix_path, manifest_path):
    ids, matrix, kind = read_distance_csv(matrix_path)
    manifest = parse_manifest(manifest_path)
    if list(ids) != list(manifest.ids):
        raise ParameterError(
            "matrix ids do not match manifest ids (same order required)"
        )
    return ids, matrix, kind, manifest


def _atomic_write_text(path, text: str):
    tmp = Path(f"{path}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_report(path, rows):
    if path is None:
        return
    lines = ["metric,value,std,runs"]
    lines += ["%s,%.17g,%.17g,%d" % row for row in rows]
    _atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_model(args) -> int:
    pc, lp = _configs(args)
    model = _cached_model(args.image, args.image.name, pc, lp, args.cache)
    save_dictionary(args.output, model.dictionary)
    meta = {
        "image_id": model.image_id,
        "scale": model.scale,
        "self_complexity": model.self_complexity,
        "seed": pc.seed,
    }
    _atomic_write_text(args.output.with_suffix(".meta"),
                       json.dumps(meta, sort_keys=True) + "\n")
    print(
        f"{model.image_id}: m={model.m} n={model.n} scale={model.scale} "
        f"self_complexity={model.self_complexity:.6f}"
    )
    return 0


def cmd_dist(args) -> int:
    if args.kind == "ds":
        pc, lp = _configs(args)
        mx = _cached_model(args.image_a, str(args.image_a), pc, lp, args.cache)
        my = _cached_model(args.image_b, str(args.image_b), pc, lp, args.cache)
        d = distance(mx, my)
    else:
        fn = ncd if args.kind == "ncd" else cdm
        bx = image_bytes(load_image(args.image_a))
        by = image_bytes(load_image(args.image_b))
        d = fn(bx, by, args.compressor)
    print(f"{d:.6f}")
    return 0


def cmd_matrix(args) -> int:
    manifest = parse_manifest(args.manifest)
    if args.kind == "ds":
        pc, lp = _configs(args)
        models = _build_models(manifest, pc, lp, args.cache, args.jobs)
        matrix = distance_matrix(models)
    else:
        blobs = [image_bytes(load_image(p)) for p in manifest.paths]
        matrix = compression_distance_matrix(blobs, args.kind, args.compressor)
    write_distance_csv(args.output, list(manifest.ids), matrix, KIND_NAMES[args.kind])
    print(f"wrote {len(manifest)}x{len(manifest)} {KIND_NAMES[args.kind]} matrix to {args.output}")
    return 0


def cmd_cluster(args) -> int:
    _, matrix, _, manifest = _load_matrix_with_labels(args.matrix, args.manifest)
    if args.runs < 1:
        raise ParameterError("--runs must be >= 1")
    seed = args.seed if args.seed is not None else _default_seed()
    classes = sorted(set(manifest.labels))
    truth = list(manifest.labels)
    # one single-restart clustering per run so the spread across seeds is real
    accs = [
        hungarian_accuracy(
            spectral_cluster(matrix, len(classes), seed=seed + r, runs=1).labels,
            truth,
        )
        for r in range(args.runs)
    ]
    mean, std = float(np.mean(accs)), float(np.std(accs))
    tree = average_linkage(matrix)
    tree_acc = hungarian_accuracy(tree.cut(len(classes)), truth)
    print(f"images: {len(manifest)}  classes: {len(classes)}")
    print(
        f"spectral accuracy: {100.0 * mean:.1f}% +/- {100.0 * std:.1f}% "
        f"over {args.runs} runs"
    )
    print(f"average-linkage accuracy: {100.0 * tree_acc:.1f}%")
    rows = [
        (f"spectral_accuracy_run_{r + 1}", acc, 0.0, 1) for r, acc in enumerate(accs)
    ]
    rows.append(("spectral_accuracy", mean, std, args.runs))
    rows.append(("average_linkage_accuracy", tree_acc, 0.0, 1))
    _write_report(args.output, rows)
    return 0


def cmd_classify(args) -> int:
    _, matrix, _, manifest = _load_matrix_with_labels(args.matrix, args.manifest)
    preds, acc = knn_loo_classify(matrix, list(manifest.labels))
    wrong = [
        (manifest.ids[i], manifest.labels[i], preds[i])
        for i in range(len(manifest))
        if preds[i] != manifest.labels[i]
    ]
    print(f"images: {len(manifest)}  classes: {len(set(manifest.labels))}")
    print(f"1-NN leave-one-out accuracy: {100.0 * acc:.1f}%")
    for image_id, truth, pred in wrong:
        print(f"  miss: {image_id} ({truth} -> {pred})")
    _write_report(args.output, [("knn_loo_accuracy", acc, 0.0, 1)])
    return 0


def cmd_retrieve(args) -> int:
    ids, matrix, _, manifest = _load_matrix_with_labels(args.matrix, args.manifest)
    labels = list(manifest.labels)
    if args.query is not None:
        if args.query not in ids:
            raise ParameterError(f"query id {args.query!r} not in manifest")
        queries = [ids.index(args.query)]
    else:
        queries = list(range(len(ids)))
    scores = []
    for q in queries:
        prec, rec = precision_recall(matrix, labels, q, args.topk)
        scores.append((ids[q], labels[q], prec, rec))
    if args.query is not None:
        q = queries[0]
        for rank, j in enumerate(retrieve(matrix, q, args.topk), 1):
            print(f"{rank}\t{ids[j]}\t{matrix[q, j]:.6f}\t{labels[j]}")
        _, _, prec, rec = scores[0]
        print(f"precision@{args.topk}: {prec:.1f}%  recall@{args.topk}: {rec:.1f}%")
    else:
        for image_id, label, prec, rec in scores:
            print(f"{image_id}\t{label}\t{prec:.1f}\t{rec:.1f}")
        mp = float(np.mean([s[2] for s in scores]))
        mr = float(np.mean([s[3] for s in scores]))
        print(
            f"mean precision@{args.topk}: {mp:.1f}%  "
            f"mean recall@{args.topk}: {mr:.1f}%"
        )
    if args.output is not None:
        lines = ["query,label,precision,recall"]
        lines += ["%s,%s,%.17g,%.17g" % s for s in scores]
        _atomic_write_text(args.output, "\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsedist",
        description="Image similarity via per-image sparse dictionaries "
                    "and compression baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="learn a dictionary for one image")
    p.add_argument("image", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="SPDICT output path")
    _add_model_flags(p)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("dist", help="distance between two images")
    p.add_argument("image_a", type=Path)
    p.add_argument("image_b", type=Path)
    p.add_argument("--kind", choices=sorted(KIND_NAMES), default="ds")
    p.add_argument("--compressor", choices=compressor_names(), default=DEFAULT_COMPRESSOR)
    _add_model_flags(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("matrix", help="pairwise distance matrix over a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="CSV output path")
    p.add_argument("--kind", choices=sorted(KIND_NAMES), default="ds")
    p.add_argument("--compressor", choices=compressor_names(), default=DEFAULT_COMPRESSOR)
    p.add_argument("--jobs", type=int, default=1, help="parallel model-building processes")
    _add_model_flags(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("cluster", help="cluster a distance matrix and score accuracy")
    p.add_argument("matrix", type=Path)
    p.add_argument("manifest", type=Path)
    p.add_argument("--runs", type=int, default=10,
                   help="independent clustering runs (each reported, plus mean and std)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output", type=Path, default=None, help="report CSV path")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("classify", help="leave-one-out nearest-neighbor accuracy")
    p.add_argument("matrix", type=Path)
    p.add_argument("manifest", type=Path)
    p.add_argument("-o", "--output", type=Path, default=None, help="report CSV path")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("retrieve", help="ranked neighbors for one query image")
    p.add_argument("matrix", type=Path)
    p.add_argument("manifest", type=Path)
    p.add_argument("--query", default=None,
                   help="query image id (manifest path); omit to score every image")
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("-o", "--output", type=Path, default=None,
                   help="per-query precision/recall CSV path")
    p.set_defaults(func=cmd_retrieve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except DegenerateInputError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SparseDistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
