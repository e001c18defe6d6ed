"""Small input-validation helpers, in the spirit of sklearn.utils.validation."""

import numbers

import numpy as np

from .exceptions import DimensionError


def check_point(x, dim, name="x"):
    """Return ``x`` as a finite float64 vector of length ``dim``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0 and dim == 1:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise DimensionError(
            f"{name} must be a vector of length {dim}, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_points(X, dim, name="X"):
    """Return ``X`` as a (k, dim) float64 array; a single point is promoted."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1 and dim == 1 and arr.shape[0] != 1:
        arr = arr[:, None]
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionError(
            f"{name} must have shape (k, {dim}), got {np.shape(X)}"
        )
    return arr


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_open_unit(value, name):
    if not isinstance(value, numbers.Real) or not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_choice(value, choices, name):
    if value not in choices:
        raise ValueError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value
