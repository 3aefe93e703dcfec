"""Input validation helpers.

Losses intentionally use only the light checks (shape compatibility): the
finite-difference oracle perturbs predictions without re-normalizing, so the
per-pixel simplex constraint must not be enforced on loss inputs.  The strict
checks guard API boundaries that receive genuine model output.
"""

import numpy as np

from .errors import DataError, DimensionError, DomainError

SIMPLEX_ATOL = 1e-6


def as_class_matrix(x, name="array"):
    """Coerce to a float64 C x N matrix without copying when possible."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D (classes x pixels), got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one pixel, got shape {arr.shape}")
    return arr


def check_same_shape(a, b, name_a="prediction", name_b="target"):
    if a.shape != b.shape:
        raise DimensionError(f"{name_a} shape {a.shape} does not match {name_b} shape {b.shape}")


def check_prob_volume(probs):
    """Strict check for normalized model output: simplex per pixel."""
    probs = as_class_matrix(probs, "prediction volume")
    if not np.all(np.isfinite(probs)):
        raise DomainError("prediction volume contains non-finite values")
    if probs.min() < -SIMPLEX_ATOL or probs.max() > 1.0 + SIMPLEX_ATOL:
        raise DomainError("prediction volume entries must lie in [0, 1]")
    col_sums = probs.sum(axis=0)
    if np.max(np.abs(col_sums - 1.0)) > SIMPLEX_ATOL:
        raise DomainError("prediction volume columns must sum to 1 per pixel")
    return probs


def check_onehot_volume(onehot):
    """Strict check for one-hot targets: exactly one 1 per pixel."""
    onehot = as_class_matrix(onehot, "target volume")
    if not np.all((onehot == 0.0) | (onehot == 1.0)):
        raise DataError("target volume entries must be 0 or 1")
    if not np.all(onehot.sum(axis=0) == 1.0):
        raise DataError("target volume must have exactly one active class per pixel")
    return onehot


def check_image_batch(images, name="images"):
    """Coerce an image batch to float64 (B, C, H, W)."""
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis, np.newaxis]
    elif arr.ndim == 3:
        arr = arr[:, np.newaxis]
    elif arr.ndim != 4:
        raise DimensionError(f"{name} must be (H,W), (B,H,W) or (B,C,H,W), got shape {arr.shape}")
    return arr


def check_label_batch(labels, num_classes, name="labels"):
    """Coerce labels to int64 (B, H, W) and bound-check class indices."""
    arr = np.asarray(labels)
    if not np.issubdtype(arr.dtype, np.integer):
        raise DataError(f"{name} must be integer class indices, got dtype {arr.dtype}")
    arr = arr.astype(np.int64, copy=False)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    elif arr.ndim != 3:
        raise DimensionError(f"{name} must be (H,W) or (B,H,W), got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
        raise DataError(f"{name} contain indices outside [0, {num_classes})")
    return arr
