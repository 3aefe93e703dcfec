"""Closed-form similarity functions and their derivatives.

Two building blocks shared by every loss in the package:

* smoothed cosine similarity between a prediction vector and a label vector,
      cos = (a.b + gamma) / (|a| |b| + gamma)
* the t-vMF similarity, a rational sharpening of the cosine controlled by a
  concentration parameter,
      phi(c; kappa) = (1 + c) / (1 + kappa (1 - c)) - 1

All math runs in 64-bit floats.  Every function is pure.
"""

import numpy as np

from .errors import DegenerateInputError, DimensionError, DomainError

# Tolerance for float noise pushing cos slightly outside [0, 1]; values within
# the tolerance are clamped, values beyond it are a caller bug.
COS_DOMAIN_TOL = 1e-9


def _check_gamma(gamma):
    gamma = float(gamma)
    if gamma < 0.0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    return gamma


def _check_kappa(kappa):
    kappa = np.asarray(kappa, dtype=np.float64)
    if np.any(kappa < 0.0):
        raise DomainError(f"kappa must be >= 0, got {kappa}")
    return kappa


def clamp_cos(cos_theta):
    """Clamp cosine values to [0, 1], rejecting anything beyond float noise."""
    c = np.asarray(cos_theta, dtype=np.float64)
    if np.any(c < -COS_DOMAIN_TOL) or np.any(c > 1.0 + COS_DOMAIN_TOL):
        raise DomainError(
            f"cos theta must lie in [0, 1] (tolerance {COS_DOMAIN_TOL}), got {cos_theta}"
        )
    return np.clip(c, 0.0, 1.0)


def cosine_similarity(a, b, gamma=1.0):
    """Smoothed cosine similarity of two nonnegative vectors.

    The gamma term mirrors the usual Dice smoothing so that two empty
    vectors score 1 (no disagreement) instead of dividing by zero.
    """
    gamma = _check_gamma(gamma)
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")
    if a.size < 1:
        raise DimensionError("vectors must have length >= 1")
    denom = np.sqrt(a @ a) * np.sqrt(b @ b) + gamma
    if denom == 0.0:
        raise DegenerateInputError("zero-norm vectors with gamma=0 make cosine undefined")
    return float((a @ b + gamma) / denom)


def cosine_similarity_gradient(a, b, gamma=1.0):
    """Gradient of cosine_similarity(a, b, gamma) with respect to ``a``.

    Quotient rule through the norm product; ``b`` is treated as constant.
    At |a| = 0 the norm is not differentiable and its term is dropped
    (subgradient 0), which only matters for inputs no softmax can produce.
    """
    gamma = _check_gamma(gamma)
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")
    norm_a = np.sqrt(a @ a)
    norm_b = np.sqrt(b @ b)
    denom = norm_a * norm_b + gamma
    if denom == 0.0:
        raise DegenerateInputError("zero-norm vectors with gamma=0 make cosine undefined")
    numer = a @ b + gamma
    if norm_a == 0.0:
        d_denom = np.zeros_like(a)
    else:
        d_denom = (norm_b / norm_a) * a
    return (b * denom - numer * d_denom) / denom**2


def t_vmf_similarity(cos_theta, kappa):
    """t-vMF similarity of a cosine value; larger kappa concentrates it near 1.

    kappa=0 returns the cosine unchanged.  The output lives in
    [-kappa/(1+kappa), 1], reaching 1 exactly at cos theta = 1.
    Accepts scalars or arrays (broadcast like a ufunc).
    """
    kappa = _check_kappa(kappa)
    c = clamp_cos(cos_theta)
    phi = np.where(kappa == 0.0, c, (1.0 + c) / (1.0 + kappa * (1.0 - c)) - 1.0)
    if phi.ndim == 0:
        return float(phi)
    return phi


def t_vmf_similarity_derivative(cos_theta, kappa):
    """Derivative of the t-vMF similarity with respect to cos theta.

    d phi / d cos = (1 + 2 kappa) / (1 + kappa (1 - cos))^2, strictly positive.
    """
    kappa = _check_kappa(kappa)
    c = clamp_cos(cos_theta)
    deriv = (1.0 + 2.0 * kappa) / (1.0 + kappa * (1.0 - c)) ** 2
    if deriv.ndim == 0:
        return float(deriv)
    return deriv
