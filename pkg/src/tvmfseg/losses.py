"""Segmentation losses with per-class breakdowns and analytic gradients.

Every loss takes a prediction grid and a one-hot target grid, both shaped
(classes, pixels) with pixels flattened over the whole mini-batch, and
returns a LossResult: the scalar value, the per-class components whose mean
is the value, and d(value)/d(prediction).  Targets are constants; no
gradient flows into them.

The losses do not enforce the per-pixel simplex: the finite-difference
oracle perturbs single entries, and single-class views (C=1) are legal.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .similarity import (
    clamp_cos,
    t_vmf_similarity,
    t_vmf_similarity_derivative,
)
from .validation import as_class_matrix, check_same_shape


@dataclass
class LossResult:
    value: float
    per_class: np.ndarray
    grad: np.ndarray


def _prepare(pred, target):
    pred = as_class_matrix(pred, "prediction")
    target = as_class_matrix(target, "target")
    check_same_shape(pred, target)
    return pred, target


def _check_gamma(gamma):
    gamma = float(gamma)
    if gamma < 0.0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    return gamma


def _result(per_class, grad_per_class):
    # grad of the class mean: each class row contributes 1/C of its own grad
    per_class = np.asarray(per_class, dtype=np.float64)
    value = float(per_class.mean())
    grad = grad_per_class / per_class.shape[0]
    return LossResult(value=value, per_class=per_class, grad=grad)


def dice_loss(pred, target, gamma=1.0):
    """Smoothed soft Dice loss, averaged over classes.

    Per class: 1 - (2 sum(AB) + gamma) / (sum(A^2) + sum(B^2) + gamma).
    """
    pred, target = _prepare(pred, target)
    gamma = _check_gamma(gamma)
    inter = np.sum(pred * target, axis=1)
    numer = 2.0 * inter + gamma
    denom = np.sum(pred**2, axis=1) + np.sum(target**2, axis=1) + gamma
    per_class = 1.0 - numer / denom
    # d/dA [1 - N/D] = (N dD - D dN) / D^2 with dN = 2B, dD = 2A
    grad = (2.0 * pred * numer[:, None] - 2.0 * target * denom[:, None]) / (denom**2)[:, None]
    return _result(per_class, grad)


def _row_cosine(pred, target, gamma):
    """Per-class smoothed cosine and the pieces its gradient needs."""
    dots = np.sum(pred * target, axis=1)
    norm_p = np.sqrt(np.sum(pred**2, axis=1))
    norm_t = np.sqrt(np.sum(target**2, axis=1))
    denom = norm_p * norm_t + gamma
    if np.any(denom == 0.0):
        raise DomainError("zero-norm class vectors with gamma=0 make cosine undefined")
    cos = (dots + gamma) / denom
    return cos, dots, norm_p, norm_t, denom


def _row_cosine_gradient(pred, target, gamma, dots, norm_p, norm_t, denom):
    """d cos_i / d pred, row-wise quotient rule (norm term dropped at |A|=0)."""
    safe_norm_p = np.where(norm_p == 0.0, 1.0, norm_p)
    d_denom = (norm_t / safe_norm_p)[:, None] * pred
    d_denom[norm_p == 0.0] = 0.0
    numer = dots + gamma
    return (target * denom[:, None] - numer[:, None] * d_denom) / (denom**2)[:, None]


def normalized_dice_loss(pred, target, gamma=1.0):
    """Dice loss rewritten on per-class normalized vectors: 1 - cos theta."""
    pred, target = _prepare(pred, target)
    gamma = _check_gamma(gamma)
    cos, dots, norm_p, norm_t, denom = _row_cosine(pred, target, gamma)
    per_class = 1.0 - cos
    grad = -_row_cosine_gradient(pred, target, gamma, dots, norm_p, norm_t, denom)
    return _result(per_class, grad)


def t_vmf_dice_loss(pred, target, kappas, gamma=1.0):
    """Squared-error loss on the t-vMF similarity, per-class concentration.

    Per class: (1 - phi(cos theta_i; kappa_i))^2.  The square keeps the loss
    nonnegative even where the similarity goes negative.  ``kappas`` is one
    value per class (a scalar broadcasts).
    """
    pred, target = _prepare(pred, target)
    gamma = _check_gamma(gamma)
    num_classes = pred.shape[0]
    kappas = np.asarray(kappas, dtype=np.float64)
    if kappas.ndim == 0:
        kappas = np.full(num_classes, float(kappas))
    if kappas.shape != (num_classes,):
        raise ConfigurationError(
            f"expected {num_classes} kappa values, got shape {kappas.shape}"
        )
    if np.any(kappas < 0.0):
        raise DomainError(f"kappa must be >= 0, got {kappas}")
    cos, dots, norm_p, norm_t, denom = _row_cosine(pred, target, gamma)
    cos = clamp_cos(cos)
    phi = np.asarray(t_vmf_similarity(cos, kappas))
    residual = 1.0 - phi
    per_class = residual**2
    dphi_dcos = np.asarray(t_vmf_similarity_derivative(cos, kappas))
    dcos = _row_cosine_gradient(pred, target, gamma, dots, norm_p, norm_t, denom)
    grad = (-2.0 * residual * dphi_dcos)[:, None] * dcos
    return _result(per_class, grad)


def generalized_dice_loss(pred, target, gamma=1.0):
    """Generalized Dice loss with inverse-square class-volume weights.

    value = 1 - 2 (sum_c w_c sum(AB) + gamma) / (sum_c w_c sum(A + B) + gamma)
    with w_c = 1 / (sum B_c)^2 and w_c = 0 for classes absent from the target.

    The loss is a single ratio, not a class mean; per_class reports each
    class's weighted share, scaled so the components still average to value.
    """
    pred, target = _prepare(pred, target)
    gamma = _check_gamma(gamma)
    num_classes = pred.shape[0]
    target_sums = np.sum(target, axis=1)
    weights = np.zeros(num_classes)
    nonempty = target_sums > 0
    weights[nonempty] = 1.0 / target_sums[nonempty] ** 2
    inter = weights * np.sum(pred * target, axis=1)
    total = weights * np.sum(pred + target, axis=1)
    numer = np.sum(inter) + gamma
    denom = np.sum(total) + gamma
    if denom == 0.0:
        raise DomainError("empty target with gamma=0 makes generalized Dice undefined")
    per_class = 1.0 - (2.0 * num_classes * inter + 2.0 * gamma) / denom
    # dN/dA_cn = w_c B_cn, dD/dA_cn = w_c
    grad = 2.0 * weights[:, None] * (numer - target * denom) / denom**2
    return LossResult(value=float(per_class.mean()), per_class=per_class, grad=grad)


def focal_tversky_loss(pred, target, alpha=0.7, beta=0.3, focal_gamma=4.0 / 3.0, gamma=1.0):
    """Focal Tversky loss: asymmetric overlap index with a focusing exponent.

    Per class: (1 - TI)^(1/focal_gamma) where
    TI = (sum(AB) + gamma) / (sum(AB) + alpha sum(B(1-A)) + beta sum(A(1-B)) + gamma).
    alpha weights missed target pixels, beta weights false positives.
    """
    pred, target = _prepare(pred, target)
    gamma = _check_gamma(gamma)
    alpha = float(alpha)
    beta = float(beta)
    focal_gamma = float(focal_gamma)
    if not 0.0 <= alpha <= 1.0 or not 0.0 <= beta <= 1.0:
        raise DomainError(f"alpha and beta must lie in [0, 1], got {alpha}, {beta}")
    if focal_gamma <= 0.0:
        raise DomainError(f"focal_gamma must be > 0, got {focal_gamma}")
    exponent = 1.0 / focal_gamma
    tp = np.sum(pred * target, axis=1)
    fn = np.sum(target * (1.0 - pred), axis=1)
    fp = np.sum(pred * (1.0 - target), axis=1)
    numer = tp + gamma
    denom = tp + alpha * fn + beta * fp + gamma
    if np.any(denom == 0.0):
        raise DomainError("empty class with gamma=0 makes the Tversky index undefined")
    ti = numer / denom
    shortfall = np.maximum(1.0 - ti, 0.0)
    per_class = shortfall**exponent
    # dTI/dA = (dN D - N dD) / D^2 with dN = B, dD = B - alpha B + beta (1 - B)
    d_denom = target - alpha * target + beta * (1.0 - target)
    dti = (target * denom[:, None] - numer[:, None] * d_denom) / (denom**2)[:, None]
    # outer factor -p (1 - TI)^(p-1); at TI=1 the power-rule factor diverges
    # for p<1, so the minimum uses subgradient 0 there
    outer = np.zeros_like(shortfall)
    positive = shortfall > 0.0
    outer[positive] = -exponent * shortfall[positive] ** (exponent - 1.0)
    grad = outer[:, None] * dti
    return _result(per_class, grad)


LOSSES = {
    "dice": dice_loss,
    "normalized_dice": normalized_dice_loss,
    "t_vmf": t_vmf_dice_loss,
    "generalized_dice": generalized_dice_loss,
    "focal_tversky": focal_tversky_loss,
}
