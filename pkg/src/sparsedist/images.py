"""Image ingestion: grayscale conversion, scale selection, patch sampling.

A grayscale image is represented throughout as a 2-D float64 array with
intensities in [0, 1]. The end product of this module is a PatchMatrix: a
column matrix of vectorized, zero-mean, unit-std patches sampled from the
textured parts of an image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image
from scipy.ndimage import gaussian_laplace

from .errors import DegenerateInputError, DimensionError, NumericError, ParameterError

# One vectorized block of candidate corners per threshold level; if a block
# fails to fill the quota the energy threshold is halved (see extract_patches).
DRAWS_PER_ROUND = 50_000

# stds at or below this are indistinguishable from float rounding of a flat
# region; dividing by them would amplify noise into fake structure
PATCH_STD_FLOOR = 1e-12

REC601_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class PatchConfig:
    """Patch sampling configuration. Defaults follow the standard recipe."""

    patch_side: int = 8
    patch_count: int = 3000
    energy_fraction: float = 0.1
    seed: int = 0
    auto_scale: bool = True
    candidate_scales: tuple[int, ...] = (1, 2, 4, 8)

    def __post_init__(self):
        if self.patch_side < 2:
            raise ParameterError(f"patch_side must be >= 2, got {self.patch_side}")
        if self.patch_count < 1:
            raise ParameterError(f"patch_count must be >= 1, got {self.patch_count}")
        if self.energy_fraction < 0:
            raise ParameterError("energy_fraction must be >= 0")
        scales = tuple(self.candidate_scales)
        if not scales:
            raise ParameterError("candidate_scales must be non-empty")
        if any(s < 1 for s in scales) or any(
            b <= a for a, b in zip(scales, scales[1:])
        ):
            raise ParameterError(
                "candidate_scales must be strictly increasing factors >= 1"
            )
        object.__setattr__(self, "candidate_scales", scales)


@dataclass
class PatchMatrix:
    """k vectorized patches as columns, each normalized to mean 0 and std 1.

    raw_means/raw_stds record each patch's statistics before normalization
    so the original pixel values remain recoverable.
    """

    columns: np.ndarray  # (m, k)
    raw_means: np.ndarray  # (k,)
    raw_stds: np.ndarray  # (k,)

    @property
    def m(self) -> int:
        return self.columns.shape[0]

    @property
    def k(self) -> int:
        return self.columns.shape[1]

    def validate(self):
        means = self.columns.mean(axis=0)
        stds = self.columns.std(axis=0)
        if not np.all(np.abs(means) <= 1e-9):
            raise NumericError("patch columns are not zero-mean")
        if not np.all(np.abs(stds - 1.0) <= 1e-6):
            raise NumericError("patch columns are not unit-std")
        if not np.all(self.raw_stds > 0):
            raise DegenerateInputError("zero-variance patch admitted")


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate a grayscale image array and return it as float64."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"grayscale image must be 2-D, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise NumericError("image contains non-finite intensities")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ParameterError("image intensities must lie in [0, 1]")
    return img


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Convert an (h, w, 3) image to grayscale by Rec. 601 luma.

    Already-gray input ((h, w) or (h, w, 1)) passes through unchanged.
    """
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim == 2:
        return check_image(arr)
    if arr.ndim == 3 and arr.shape[2] == 1:
        return check_image(arr[:, :, 0])
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(
            f"expected (h, w), (h, w, 1) or (h, w, 3) input, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise NumericError("image contains non-finite intensities")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError("image intensities must lie in [0, 1]")
    return arr @ REC601_WEIGHTS


def load_image(path) -> np.ndarray:
    """Read a PNG, JPEG or binary PGM (P5) file as a [0, 1] grayscale image.

    Files are decoded to 8 bits per channel and scaled by 1/255; color images
    go through the Rec. 601 conversion.
    """
    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64) / 255.0
            return check_image(arr)
        rgb = im.convert("RGB")
        arr = np.asarray(rgb, dtype=np.float64) / 255.0
    return to_grayscale(arr)


def log_keypoint_count(img: np.ndarray, sigma: float) -> int:
    """Count Laplacian-of-Gaussian keypoints at one scale.

    A keypoint is a strict local maximum of |LoG response| over its 3x3
    neighborhood whose magnitude exceeds 10% of the global maximum response.
    Border pixels are excluded.
    """
    img = check_image(img)
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise DimensionError("image smaller than the 3x3 maxima support")
    # truncate is in units of sigma; pick it so the kernel radius is ceil(3*sigma)
    truncate = np.ceil(3.0 * sigma) / sigma
    resp = np.abs(gaussian_laplace(img, sigma=sigma, truncate=truncate))
    peak = resp.max()
    if peak <= 0:
        return 0
    c = resp[1:-1, 1:-1]
    strict_max = (
        (c > resp[:-2, :-2]) & (c > resp[:-2, 1:-1]) & (c > resp[:-2, 2:])
        & (c > resp[1:-1, :-2]) & (c > resp[1:-1, 2:])
        & (c > resp[2:, :-2]) & (c > resp[2:, 1:-1]) & (c > resp[2:, 2:])
    )
    return int(np.count_nonzero(strict_max & (c > 0.1 * peak)))


def select_scale(img: np.ndarray, cfg: PatchConfig) -> int:
    """Pick the downsampling factor whose LoG scale yields the most keypoints.

    The LoG is evaluated on the original image with sigma = 1.0 * factor.
    Factors that would leave the downsampled image smaller than one patch are
    ineligible; ties go to the smaller factor.
    """
    img = check_image(img)
    if not cfg.auto_scale:
        return 1
    h, w = img.shape
    feasible = [
        f
        for f in cfg.candidate_scales
        if h // f >= cfg.patch_side and w // f >= cfg.patch_side
    ]
    if not feasible:
        raise DimensionError(
            f"image {h}x{w} too small for any candidate scale with "
            f"patch_side {cfg.patch_side}"
        )
    counts = [log_keypoint_count(img, sigma=1.0 * f) for f in feasible]
    return feasible[int(np.argmax(counts))]


def downsample(img: np.ndarray, factor: int) -> np.ndarray:
    """Block-mean downsampling; trailing partial blocks are dropped."""
    img = check_image(img)
    if int(factor) != factor or factor < 1:
        raise ParameterError(f"downsampling factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    if factor == 1:
        return img.copy()
    h2, w2 = img.shape[0] // factor, img.shape[1] // factor
    if h2 < 1 or w2 < 1:
        raise DimensionError("image smaller than one downsampling block")
    blocks = img[: h2 * factor, : w2 * factor].reshape(h2, factor, w2, factor)
    return blocks.mean(axis=(1, 3))


def extract_patches(img: np.ndarray, cfg: PatchConfig) -> PatchMatrix:
    """Sample patch_count random patches with enough energy and normalize them.

    Corners are drawn uniformly (seeded); a candidate is admitted iff its raw
    std is >= energy_fraction * global image std (and nonzero). Admitted
    patches are vectorized column-major, mean-subtracted and divided by their
    std. If a 50k-draw round cannot fill the quota the threshold is halved and
    sampling continues.
    """
    img = check_image(img)
    s = cfg.patch_side
    h, w = img.shape
    if h < s or w < s:
        raise DimensionError(f"image {h}x{w} smaller than patch side {s}")
    global_std = float(img.std())
    if global_std <= PATCH_STD_FLOOR:
        raise DegenerateInputError("degenerate input: zero variance")

    windows = sliding_window_view(img, (s, s))  # (h-s+1, w-s+1, s, s)
    rng = np.random.default_rng(cfg.seed)
    threshold = max(cfg.energy_fraction * global_std, PATCH_STD_FLOOR)

    kept_i: list[np.ndarray] = []
    kept_j: list[np.ndarray] = []
    need = cfg.patch_count
    while need > 0:
        ci = rng.integers(0, h - s + 1, size=DRAWS_PER_ROUND)
        cj = rng.integers(0, w - s + 1, size=DRAWS_PER_ROUND)
        stds = windows[ci, cj].std(axis=(1, 2))
        idx = np.nonzero(stds >= threshold)[0][:need]
        kept_i.append(ci[idx])
        kept_j.append(cj[idx])
        need -= len(idx)
        if need > 0 and len(idx) < DRAWS_PER_ROUND:
            if threshold <= PATCH_STD_FLOOR and len(idx) == 0:
                raise DegenerateInputError(
                    "cannot admit enough patches: texture below the measurable floor"
                )
            threshold = max(threshold * 0.5, PATCH_STD_FLOOR)

    ci = np.concatenate(kept_i)
    cj = np.concatenate(kept_j)
    patches = windows[ci, cj]  # (k, s, s)
    # column-major vectorization of each s x s patch
    flat = patches.transpose(0, 2, 1).reshape(cfg.patch_count, s * s)
    means = flat.mean(axis=1)
    stds = flat.std(axis=1)
    cols = ((flat - means[:, None]) / stds[:, None]).T.copy()
    return PatchMatrix(columns=cols, raw_means=means, raw_stds=stds)


def prepare_image(img: np.ndarray, cfg: PatchConfig) -> tuple[np.ndarray, int]:
    """Apply scale selection + downsampling; returns (image, chosen factor)."""
    factor = select_scale(img, cfg) if cfg.auto_scale else 1
    return downsample(img, factor), factor
