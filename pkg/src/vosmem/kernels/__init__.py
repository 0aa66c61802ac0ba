"""Backend selection for the dense read kernels.

Two interchangeable implementations exist: ``_reference`` (numpy) and
``_native`` (a compiled extension built from ``_native.pyx``). Both
implement the same contracts and agree to floating-point roundoff; they
occupy different performance regimes (see ``vosmem bench-kernels``): the
numpy backend wins while the weight matrix stays cache-resident (bounded
memory banks, the default mode of operation), the fused native kernel wins
once memory grows into the tens of thousands of locations (unbounded
long-video stress runs). ``auto`` therefore selects numpy; force a backend
with ``VOSMEM_KERNELS`` (``numpy``, ``native``, ``auto``) or
:func:`set_backend`.
"""

from __future__ import annotations

import os

import numpy as np

from . import _reference

try:
    from . import _native
except ImportError:
    _native = None

_BACKENDS = {"numpy": _reference}
if _native is not None:
    _BACKENDS["native"] = _native


def _initial_backend() -> str:
    pref = os.environ.get("VOSMEM_KERNELS", "auto").strip().lower()
    if pref in ("", "auto"):
        return "numpy"
    if pref == "native" and _native is None:
        raise ImportError(
            "VOSMEM_KERNELS=native but the compiled kernels are not built; "
            "run `python setup.py build_ext --inplace` or unset the variable")
    if pref not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {pref!r}")
    return pref


_active = _initial_backend()


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    """Switch the active backend ('numpy', 'native' or 'auto')."""
    global _active
    if name == "auto":
        _active = "numpy"
        return
    if name not in _BACKENDS:
        raise ValueError(
            f"unknown or unavailable kernel backend {name!r}; "
            f"available: {available_backends()}")
    _active = name


def _as_matrix(arr) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {out.shape}")
    return out


def similarity(query_keys, memory_keys, scale: float = 1.0) -> np.ndarray:
    return _BACKENDS[_active].similarity(
        _as_matrix(query_keys), _as_matrix(memory_keys), float(scale))


def normalize_rows(sim, mode: str = "softmax") -> np.ndarray:
    return _BACKENDS[_active].normalize_rows(_as_matrix(sim), mode)


def read(query_keys, memory_keys, memory_values, scale: float = 1.0,
         mode: str = "softmax"):
    """Fused similarity + normalization + retrieval.

    Returns (weights, retrieved): (Lq, Lm) row-stochastic weights and the
    (Lq, Cv) weighted sums over memory values.
    """
    return _BACKENDS[_active].read(
        _as_matrix(query_keys), _as_matrix(memory_keys),
        _as_matrix(memory_values), float(scale), mode)
