"""Input validation helpers shared across the package."""

import numpy as np


def as_float_matrix(X, name="X"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def as_float_vector(v, name="v", allow_nonfinite=False):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {v.shape}")
    if not allow_nonfinite and not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def as_binary_vector(v, name="v"):
    v = as_float_vector(v, name)
    if not np.all((v == 0.0) | (v == 1.0)):
        raise ValueError(f"{name} must contain only 0/1 values")
    return v


def check_same_length(*pairs):
    """pairs: (array, name). Raises if lengths differ."""
    lengths = {name: len(arr) for arr, name in pairs}
    if len(set(lengths.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in lengths.items())
        raise ValueError(f"length mismatch: {detail}")


def check_feature_count(X, d, name="X"):
    if X.shape[1] != d:
        raise ValueError(f"{name} has {X.shape[1]} features, model expects {d}")
