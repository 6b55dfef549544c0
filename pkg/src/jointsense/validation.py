"""Small input checks used by the estimator and the configuration objects."""

from __future__ import annotations

import math
import numbers

import numpy as np


def check_probability(value, name, *, allow_one=True):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    if not math.isfinite(value) or value < 0.0 or value > 1.0 or (not allow_one and value == 1.0):
        bound = "[0, 1]" if allow_one else "[0, 1)"
        raise ValueError(f"{name} must lie in {bound}, got {value}")
    return float(value)


def check_positive(value, name, *, strict=True):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    if not math.isfinite(value) or value < 0.0 or (strict and value == 0.0):
        kind = "positive" if strict else "nonnegative"
        raise ValueError(f"{name} must be finite and {kind}, got {value}")
    return float(value)


def check_discount(gamma):
    gamma = check_positive(gamma, "discount")
    if gamma >= 1.0:
        raise ValueError(f"discount must lie in (0, 1), got {gamma}")
    return gamma


def check_nonnegative_array(x, name, shape=None):
    """Return ``x`` as a finite, nonnegative float array, optionally of a fixed shape."""
    from .exceptions import DimensionError

    arr = np.asarray(x, dtype=float)
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if np.any(arr < 0.0):
        raise ValueError(f"{name} must be nonnegative")
    return arr


def truncation_horizon(gamma, tail=1e-4):
    """Smallest N with gamma**N < tail."""
    n = math.ceil(math.log(tail) / math.log(gamma))
    while gamma**n >= tail:
        n += 1
    return max(n, 1)
