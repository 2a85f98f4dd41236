"""Input validation helpers shared by the estimators and the CLI."""

import numbers

import numpy as np

__all__ = ["check_points", "check_positive_int", "check_unit_open", "check_choice"]


def check_points(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite 1-d float64 array of points inside [0, 1]."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]  # column vectors from sklearn pipelines
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12:
        raise ValueError(f"{name} must lie inside [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}")
    return value


def check_unit_open(value, name: str) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in the open interval (0, 1)")
    return value


def check_choice(value, name: str, choices) -> str:
    if value not in choices:
        raise ValueError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
