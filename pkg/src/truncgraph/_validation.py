"""Small argument checks shared by the builders, solvers and estimators."""

import numbers

import numpy as np
from sklearn.utils import check_array


def check_count(value, name, minimum=0):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_probability(value, name, allow_zero=True, allow_one=True):
    value = float(value)
    lo_ok = value > 0 or (allow_zero and value == 0)
    hi_ok = value < 1 or (allow_one and value == 1)
    if not (np.isfinite(value) and lo_ok and hi_ok):
        raise ValueError(f"{name} must be a probability, got {value}")
    return value


def check_nonnegative(value, name):
    value = float(value)
    if not (np.isfinite(value) and value >= 0):
        raise ValueError(f"{name} must be finite and >= 0, got {value}")
    return value


def check_features(X):
    """Return ``X`` as a finite 2-D float array, raising ``ValueError`` otherwise."""
    return check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_min_samples=1)


def check_vertices(vertices, n, name="vertices"):
    """Coerce a vertex index array (0-based) and check its range and uniqueness.

    Accepts a 1-D array or an ``(m, 1)`` column, which is the shape sklearn
    tooling hands to ``fit``/``predict``.
    """
    v = np.asarray(vertices)
    if v.ndim == 2 and v.shape[1] == 1:
        v = v[:, 0]
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size and not np.issubdtype(v.dtype, np.integer):
        if not np.all(np.mod(v, 1) == 0):
            raise ValueError(f"{name} must hold integer vertex indices")
    v = v.astype(np.intp)
    if v.size and (v.min() < 0 or v.max() >= n):
        raise ValueError(f"{name} must lie in [0, {n - 1}]")
    return v


def check_binary_labels(labels, name="labels"):
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if y.size and not np.all(np.isin(y, (0, 1))):
        raise ValueError(f"{name} must contain only 0 and 1")
    return y.astype(np.int8)
