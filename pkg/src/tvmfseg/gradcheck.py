"""Independent finite-difference oracle for validating analytic gradients.

The oracle perturbs coordinates one at a time and never re-normalizes the
perturbed prediction: it checks the unconstrained gradient each loss exposes,
leaving the simplex constraint to the model's normalization layer.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, NumericalError

# Relative error is meaningless when both gradients are ~0; the floor keeps
# such coordinates from producing false failures.
DEFAULT_ABS_FLOOR = 1e-8


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_coordinate: tuple
    passed: bool


def finite_difference_gradient(loss_fn, x, step=1e-5):
    """Central-difference gradient of a scalar function over every coordinate.

    ``x`` is any real array (a C x N prediction grid, a flat parameter
    vector, ...); ``loss_fn`` must be deterministic and return a scalar.
    """
    step = float(step)
    if step <= 0.0:
        raise DomainError(f"step must be > 0, got {step}")
    # force C order so the flat views below alias the array handed to loss_fn
    x = np.array(x, dtype=np.float64, order="C")
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = float(loss_fn(x))
        flat[i] = orig - step
        f_minus = float(loss_fn(x))
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            coord = tuple(int(k) for k in np.unravel_index(i, x.shape))
            raise NumericalError(f"loss is non-finite when perturbing coordinate {coord}")
        out[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def assert_gradients_match(analytic, numeric, rel_tol=1e-5, abs_floor=DEFAULT_ABS_FLOOR):
    """Compare gradient grids coordinate-wise.

    Per-coordinate error is |a - n| / max(|a|, |n|, abs_floor); the report
    carries the maximum and the coordinate where it occurs.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise DimensionError(
            f"gradient shapes differ: {analytic.shape} vs {numeric.shape}"
        )
    if rel_tol <= 0.0:
        raise DomainError(f"rel_tol must be > 0, got {rel_tol}")
    if abs_floor < 0.0:
        raise DomainError(f"abs_floor must be >= 0, got {abs_floor}")
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), abs_floor)
    err = np.abs(analytic - numeric) / scale
    worst_flat = int(np.argmax(err))
    worst = tuple(int(k) for k in np.unravel_index(worst_flat, err.shape))
    max_err = float(err.reshape(-1)[worst_flat])
    return GradCheckReport(max_rel_error=max_err, worst_coordinate=worst, passed=max_err <= rel_tol)
