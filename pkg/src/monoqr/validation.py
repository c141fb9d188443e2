"""Small input-validation helpers shared across modules."""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteError

__all__ = [
    "as_float_array",
    "check_finite",
    "check_positive",
    "check_tau",
    "check_alpha",
]


def as_float_array(values, name: str, ndim: int | None = None) -> np.ndarray:
    """Convert to a C-contiguous float64 array, optionally enforcing ndim."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or infinite entries")
    return arr


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_tau(tau: float) -> float:
    """Quantile levels live in the open interval (0, 1)."""
    tau = float(tau)
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    return tau


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return alpha
