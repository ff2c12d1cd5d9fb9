"""Input validation helpers shared by the functional core and the estimators."""

from __future__ import annotations

import numbers

import numpy as np

NORMALIZATION_ATOL = 1e-12


def check_scalar(value, name, *, min_val=None, max_val=None,
                 include_min=True, include_max=True):
    """Validate a real scalar against optional bounds and return it as float."""
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if min_val is not None:
        if (value < min_val) if include_min else (value <= min_val):
            op = ">=" if include_min else ">"
            raise ValueError(f"{name} must be {op} {min_val}, got {value}")
    if max_val is not None:
        if (value > max_val) if include_max else (value >= max_val):
            op = "<=" if include_max else "<"
            raise ValueError(f"{name} must be {op} {max_val}, got {value}")
    return value


def check_mean_photon(value, name="omega"):
    return check_scalar(value, name, min_val=0.0)


def check_probability(value, name):
    return check_scalar(value, name, min_val=0.0, max_val=1.0)


def check_count(value, name, *, min_val=0):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < min_val:
        raise ValueError(f"{name} must be >= {min_val}, got {value}")
    return value


def check_behavior(q, name="behavior"):
    """Return ``q`` as a validated 2x2 float array indexed ``[x][b]``.

    Accepts anything array-like with four entries (a flat row
    ``(p(0|0), p(1|0), p(0|1), p(1|1))`` is reshaped). Each row must be a
    probability distribution over ``b`` within ``NORMALIZATION_ATOL``.
    """
    arr = np.asarray(q, dtype=float)
    if arr.size != 4:
        raise ValueError(f"{name} must have 4 entries (2x2), got shape {arr.shape}")
    arr = arr.reshape(2, 2)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if np.any(arr < -NORMALIZATION_ATOL) or np.any(arr > 1 + NORMALIZATION_ATOL):
        raise ValueError(f"{name} entries must lie in [0, 1], got {arr.tolist()}")
    sums = arr.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > NORMALIZATION_ATOL):
        raise ValueError(f"{name} rows must sum to 1, got row sums {sums.tolist()}")
    return np.clip(arr, 0.0, 1.0)


def check_behaviors(X, name="X"):
    """Validate a batch of behaviors, shape ``(n, 4)`` or ``(n, 2, 2)``."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2 and arr.shape == (2, 2):
        arr = arr[None]
    if arr.ndim == 2 and arr.shape[1] == 4:
        arr = arr.reshape(-1, 2, 2)
    if arr.ndim != 3 or arr.shape[1:] != (2, 2):
        raise ValueError(f"{name} must have shape (n_samples, 4) or (n_samples, 2, 2), "
                         f"got {np.shape(X)}")
    return np.stack([check_behavior(row, f"{name}[{i}]") for i, row in enumerate(arr)])


def check_bits(bits, name="bits"):
    """Return a 1-D uint8 array of 0/1 values."""
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if arr.size and (arr.dtype.kind not in "iu" or arr.min() < 0 or arr.max() > 1):
        if arr.dtype.kind != "f" or not np.isin(arr, (0.0, 1.0)).all():
            raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(np.uint8, copy=False)
