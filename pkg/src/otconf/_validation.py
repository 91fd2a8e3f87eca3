"""Input validation helpers used by every module.

All helpers return float64/int64 numpy arrays and raise
:class:`~otconf.exceptions.ValidationError` with the offending name so CLI
messages stay actionable.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError


def as_float_array(values, name: str, ndim: int | None = None) -> np.ndarray:
    """Coerce to a float64 array, rejecting non-finite entries."""
    arr = np.asarray(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(f"{name} has a non-finite entry at index {tuple(bad)}")
    return arr


def check_features(values, name: str = "features") -> np.ndarray:
    """Validate an (n, d) feature matrix with n >= 1 and d >= 1."""
    # FeatureTable-like objects pass through their array.
    values = getattr(values, "features", values)
    arr = as_float_array(values, name, ndim=2)
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{name} must be non-empty, got shape {arr.shape}")
    return arr


def check_vector(values, name: str, length: int | None = None) -> np.ndarray:
    """Validate a finite 1-d float vector, optionally of a fixed length."""
    arr = as_float_array(values, name, ndim=1)
    if length is not None and arr.shape[0] != length:
        raise ValidationError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr


def check_labels(values, name: str = "labels", n: int | None = None) -> np.ndarray:
    """Validate an integer label vector with non-negative entries."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ValidationError(f"{name} must be integers")
        arr = arr.astype(np.int64)
    else:
        arr = arr.astype(np.int64)
    if n is not None and arr.shape[0] != n:
        raise ValidationError(f"{name} must have length {n}, got {arr.shape[0]}")
    negative = np.flatnonzero(arr < 0)
    if negative.size:
        raise ValidationError(f"{name}[{negative[0]}] is negative")
    return arr


def check_probability_vector(values, name: str = "probs", tol: float = 1e-9) -> np.ndarray:
    """Validate a probability vector, renormalizing drift within ``tol``.

    Entries must be non-negative and sum to 1 within ``tol``; inside the
    tolerance the vector is divided by its sum so downstream invariants hold
    exactly.
    """
    arr = as_float_array(values, name, ndim=1)
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    negative = np.flatnonzero(arr < 0)
    if negative.size:
        raise ValidationError(f"{name}[{negative[0]}] is negative")
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise ValidationError(f"{name} must sum to 1 within {tol:g}, got {total!r}")
    return arr / total


def readonly(arr: np.ndarray) -> np.ndarray:
    """Own a read-only copy, making the containing dataclass safely shareable."""
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out
