"""Selects the OMP kernel: compiled extension if available, numpy otherwise.

The default is resolved at import time and can be overridden either with the
SPARSEDIST_BACKEND environment variable (``c`` / ``python`` / ``auto``) or
programmatically via set_backend().
"""

from __future__ import annotations

import os

from . import _omp_py
from .errors import ParameterError

try:
    from . import _omp_c
except ImportError:
    _omp_c = None

HAVE_C = _omp_c is not None

_KERNELS = {"python": _omp_py.batch_omp_gram}
if HAVE_C:
    _KERNELS["c"] = _omp_c.batch_omp_gram


def _resolve(name: str) -> str:
    if name == "auto":
        return "c" if HAVE_C else "python"
    if name not in ("c", "python"):
        raise ParameterError(f"unknown backend {name!r} (use 'c', 'python' or 'auto')")
    if name == "c" and not HAVE_C:
        raise ParameterError("compiled backend requested but _omp_c is not built")
    return name


_active = _resolve(os.environ.get("SPARSEDIST_BACKEND", "auto"))


def active_backend() -> str:
    """Name of the kernel currently in use ('c' or 'python')."""
    return _active


def available_backends() -> list[str]:
    """Kernel names installed in this environment."""
    return sorted(_KERNELS)


def set_backend(name: str) -> str:
    """Force a kernel; returns the previously active one."""
    global _active
    previous = _active
    _active = _resolve(name)
    return previous


def batch_omp_gram(G, alpha0T, norms_sq, eps, max_atoms):
    """Dispatch to the active kernel (see _omp_py.batch_omp_gram for the contract)."""
    return _KERNELS[_active](G, alpha0T, norms_sq, eps, max_atoms)
