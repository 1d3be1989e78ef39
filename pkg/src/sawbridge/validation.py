"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError

__all__ = [
    "check_unit_interval",
    "check_positive_int",
    "check_signal",
    "check_realizations",
    "check_is_fitted",
]


def check_unit_interval(x: float, name: str = "u") -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0 or not np.isfinite(x):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")
    return x


def check_positive_int(k, name: str = "k") -> int:
    k = int(k)
    if k < 1:
        raise ValueError(f"{name} must be a positive integer, got {k!r}")
    return k


def check_signal(values, n: int | None = None) -> np.ndarray:
    """Validate a grid signal: 1-D, finite, optionally of length ``n``."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"signal must be a nonempty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal contains non-finite values")
    if n is not None and arr.size != n:
        raise ValueError(f"signal has {arr.size} samples, expected {n}")
    return arr


def check_realizations(X, n: int) -> np.ndarray:
    """Validate a matrix of realizations, one per row, on an ``n``-point grid."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n:
        raise ValueError(f"expected realizations of shape (m, {n}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("realizations contain non-finite values")
    return arr


def check_is_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
