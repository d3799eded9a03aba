"""Input validation helpers shared by the estimators and solvers."""

from numbers import Integral, Real

import numpy as np
from sklearn.utils import check_scalar


def check_gamma(gamma, name="gamma"):
    """Discount factors live in (0, 1]."""
    if isinstance(gamma, bool) or not isinstance(gamma, Real):
        raise TypeError(f"{name} must be a real number, got {type(gamma).__name__}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"{name}={gamma} must be in (0, 1]")
    return float(gamma)


def check_unit_interval(value, name):
    return float(check_scalar(value, name, Real, min_val=0.0, max_val=1.0))


def check_positive(value, name):
    return float(check_scalar(value, name, Real, min_val=0.0,
                              include_boundaries="neither"))


def check_count(value, name, min_val=1):
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < min_val:
        raise ValueError(f"{name}={value} must be >= {min_val}")
    return int(value)


def check_finite_table(table, name, ndim):
    arr = np.asarray(table, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def check_index_array(indices, upper, name):
    arr = np.asarray(indices)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        raise TypeError(f"{name} must hold integers")
    arr = arr.astype(np.int64, copy=False).ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= upper):
        raise ValueError(f"{name} out of range [0, {upper})")
    return arr
