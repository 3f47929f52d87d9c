"""Compression-based distance baselines.

Uses off-the-shelf compressors to approximate information distance between
byte strings: the conditional length C(x|y) is how much compressing y's bytes
helps compress x's, and NCD / CDM turn that into normalized dissimilarities.
"""

from __future__ import annotations

import bz2
import lzma
import zlib

import numpy as np

from .errors import CompressorError, DimensionError

_COMPRESSORS = {
    "zlib": lambda data: len(zlib.compress(data, 9)),
    "bz2": lambda data: len(bz2.compress(data, 9)),
    "lzma": lambda data: len(lzma.compress(data)),
}

DEFAULT_COMPRESSOR = "zlib"


def compressor_names() -> list[str]:
    return sorted(_COMPRESSORS)


def get_compressor(name: str = DEFAULT_COMPRESSOR):
    """Look up a registered compressor; returns a bytes -> int callable."""
    try:
        return _COMPRESSORS[name]
    except KeyError:
        raise CompressorError(
            f"unknown compressor {name!r}; available: {', '.join(compressor_names())}"
        ) from None


def register_compressor(name: str, fn):
    """Add a custom compressed-length function to the registry."""
    if not callable(fn):
        raise CompressorError("compressor must be callable")
    _COMPRESSORS[name] = fn


def _check_bytes(x) -> bytes:
    if not isinstance(x, (bytes, bytearray)):
        raise CompressorError(f"expected bytes, got {type(x).__name__}")
    if len(x) == 0:
        raise CompressorError("empty byte string")
    return bytes(x)


def compressed_len(x: bytes, compressor=DEFAULT_COMPRESSOR) -> int:
    """C(x): length in bytes of compressed x."""
    fn = get_compressor(compressor) if isinstance(compressor, str) else compressor
    out = fn(_check_bytes(x))
    if not isinstance(out, int) or out <= 0:
        raise CompressorError("compressor must return a positive int length")
    return out


def conditional_len(x: bytes, y: bytes, compressor=DEFAULT_COMPRESSOR) -> int:
    """C(x|y) approximated as C(x concatenated after y) - C(y).

    May be negative for a pathological compressor; the value is passed through
    untouched.
    """
    fn = get_compressor(compressor) if isinstance(compressor, str) else compressor
    x = _check_bytes(x)
    y = _check_bytes(y)
    return compressed_len(x + y, fn) - compressed_len(y, fn)


def ncd(x: bytes, y: bytes, compressor=DEFAULT_COMPRESSOR) -> float:
    """Normalized compression distance:
    max{C(x|y), C(y|x)} / max{C(x), C(y)}."""
    fn = get_compressor(compressor) if isinstance(compressor, str) else compressor
    num = max(conditional_len(x, y, fn), conditional_len(y, x, fn))
    den = max(compressed_len(x, fn), compressed_len(y, fn))
    return num / den


def cdm(x: bytes, y: bytes, compressor=DEFAULT_COMPRESSOR) -> float:
    """Compression dissimilarity: C(xy) / (C(x) + C(y)).

    Ranges from about 0.5 (x and y share all structure) toward 1 (none).
    """
    fn = get_compressor(compressor) if isinstance(compressor, str) else compressor
    x = _check_bytes(x)
    y = _check_bytes(y)
    return compressed_len(x + y, fn) / (compressed_len(x, fn) + compressed_len(y, fn))


def image_bytes(image: np.ndarray) -> bytes:
    """Serialize a grayscale image to row-major uint8 bytes (values * 255,
    rounded half to even)."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError("image must be 2-D grayscale")
    if arr.size == 0:
        raise DimensionError("image is empty")
    scaled = np.rint(arr * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8).tobytes(order="C")


def compression_distance_matrix(blobs: list[bytes], kind: str = "ncd",
                                compressor=DEFAULT_COMPRESSOR) -> np.ndarray:
    """Pairwise NCD or CDM over byte strings; diagonal is the self distance
    (not exactly zero for real compressors)."""
    if kind == "ncd":
        fn = ncd
    elif kind == "cdm":
        fn = cdm
    else:
        raise CompressorError(f"kind must be 'ncd' or 'cdm', got {kind!r}")
    comp = get_compressor(compressor) if isinstance(compressor, str) else compressor
    n = len(blobs)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        out[i, i] = fn(blobs[i], blobs[i], comp)
        for j in range(i + 1, n):
            d = fn(blobs[i], blobs[j], comp)
            out[i, j] = d
            out[j, i] = d
    return out
