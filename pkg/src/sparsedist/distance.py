"""Image models and the sparse-complexity distance.

An image model is a learned dictionary plus the image's own coding cost under
it. The distance between two images compares cross-coding costs (each image
coded by the other's dictionary) against self-coding costs: related images
share structure, so each codes cheaply under the other's atoms.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .images import PatchConfig, extract_patches, prepare_image
from .sparse import (
    CodingParams,
    LearnParams,
    SparseCode,
    batch_code,
    check_dictionary,
    ksvd_learn,
)


def sparse_complexity(code: SparseCode, p: int = 0) -> float:
    """Average coding cost per signal: mean support size (p=0) or mean l1 mass (p=1)."""
    if p not in (0, 1):
        raise ParameterError(f"p must be 0 or 1, got {p}")
    if code.k == 0:
        raise DimensionError("cannot average over an empty code")
    if p == 0:
        total = float(code.support_sizes().sum())
    else:
        total = float(sum(np.abs(coefs).sum() for _, coefs in code.cols))
    return total / code.k


@dataclass
class ImageModel:
    """A per-image dictionary, the patches it was trained on, and the
    image's self-coding cost."""

    image_id: str
    dictionary: np.ndarray
    patches: np.ndarray
    self_complexity: float
    coding: CodingParams
    scale: int = 1

    @property
    def m(self) -> int:
        return self.dictionary.shape[0]

    @property
    def n(self) -> int:
        return self.dictionary.shape[1]

    def validate(self):
        check_dictionary(self.dictionary)
        if self.patches.ndim != 2 or self.patches.shape[0] != self.m:
            raise DimensionError("patch matrix does not match dictionary rows")
        if not 0.0 < self.self_complexity <= self.coding.max_atoms:
            raise ParameterError(
                "self complexity must lie in (0, max_atoms]; "
                f"got {self.self_complexity}"
            )


def build_model(
    image: np.ndarray,
    image_id: str,
    patch_config: PatchConfig | None = None,
    learn_params: LearnParams | None = None,
) -> ImageModel:
    """Learn an image's dictionary and self-coding cost.

    Scales the image down to its characteristic detail level, samples
    normalized patches, runs K-SVD, then codes the same patches against the
    learned dictionary to measure the self cost.
    """
    patch_config = patch_config or PatchConfig()
    learn_params = learn_params or LearnParams()
    prepared, factor = prepare_image(image, patch_config)
    patches = extract_patches(prepared, patch_config)
    D = ksvd_learn(patches, learn_params)
    code = batch_code(D, patches, learn_params.coding)
    s_self = sparse_complexity(code, learn_params.coding.p)
    model = ImageModel(
        image_id=image_id,
        dictionary=D,
        patches=patches.columns,
        self_complexity=s_self,
        coding=learn_params.coding,
        scale=factor,
    )
    model.validate()
    return model


def relative_complexity(model: ImageModel, other: ImageModel) -> float:
    """Cost of coding `model`'s patches with `other`'s dictionary."""
    if model.m != other.m:
        raise DimensionError(
            f"patch dimensions differ: {model.image_id} has m={model.m}, "
            f"{other.image_id} has m={other.m}"
        )
    if model.coding != other.coding:
        raise ParameterError("models must share coding parameters")
    code = batch_code(other.dictionary, model.patches, model.coding)
    return sparse_complexity(code, model.coding.p)


def distance(x: ImageModel, y: ImageModel) -> float:
    """Sparse-complexity distance between two image models.

    Zero when the models are the same object; symmetric by construction; never
    negative (cross costs below self costs are clamped).
    """
    if x is y:
        return 0.0
    cross = relative_complexity(x, y) + relative_complexity(y, x)
    self_cost = x.self_complexity + y.self_complexity
    return max(cross / self_cost - 1.0, 0.0)


def distance_matrix(models: list[ImageModel]) -> np.ndarray:
    """All pairwise distances; computed once per unordered pair and mirrored."""
    ids = [m.image_id for m in models]
    if len(set(ids)) != len(ids):
        raise ParameterError("image ids must be unique")
    n = len(models)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            try:
                d = distance(models[i], models[j])
            except DimensionError as exc:
                raise DimensionError(
                    f"incompatible models {ids[i]!r} and {ids[j]!r}: {exc}"
                ) from None
            out[i, j] = d
            out[j, i] = d
    return out


def write_distance_csv(path, ids: list[str], matrix: np.ndarray, kind: str = "d_S"):
    """Distance matrix as CSV: a '#kind=' comment line, an id header row, then
    one row per image with full-precision (%.17g) values."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError("matrix must be square")
    if matrix.shape[0] != len(ids):
        raise DimensionError("id count does not match matrix size")
    buf = io.StringIO()
    buf.write(f"#kind={kind}\n")
    buf.write(",".join(["id"] + list(ids)) + "\n")
    for i, row_id in enumerate(ids):
        cells = ["%.17g" % v for v in matrix[i]]
        buf.write(",".join([row_id] + cells) + "\n")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def read_distance_csv(path):
    """Parse write_distance_csv output; returns (ids, matrix, kind)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#kind="):
        raise ParameterError("distance CSV must start with a #kind= line")
    kind = lines[0][len("#kind="):]
    header = lines[1].split(",")
    if header[0] != "id":
        raise ParameterError("second line must be the id header row")
    ids = header[1:]
    n = len(ids)
    if len(lines) != 2 + n:
        raise ParameterError(f"expected {n} data rows, found {len(lines) - 2}")
    matrix = np.zeros((n, n), dtype=np.float64)
    for i, line in enumerate(lines[2:]):
        cells = line.split(",")
        if cells[0] != ids[i]:
            raise ParameterError(
                f"row id {cells[0]!r} does not match header id {ids[i]!r}"
            )
        if len(cells) != n + 1:
            raise ParameterError(f"row {cells[0]!r} has {len(cells) - 1} values, expected {n}")
        matrix[i] = [float(c) for c in cells[1:]]
    return ids, matrix, kind
