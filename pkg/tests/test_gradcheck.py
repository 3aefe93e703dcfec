"""Finite-difference oracle: the checker itself must be trustworthy."""

import numpy as np
import pytest

from tvmfseg import (
    DimensionError,
    NumericalError,
    assert_gradients_match,
    dice_loss,
    finite_difference_gradient,
)


def test_constant_function_gives_zero_gradient():
    x = np.full((3, 5), 0.3)
    grad = finite_difference_gradient(lambda _: 7.25, x, 1e-5)
    assert grad.shape == x.shape
    assert np.all(grad == 0.0)


def test_sum_of_squares_at_half():
    x = np.full((2, 4), 0.5)
    grad = finite_difference_gradient(lambda v: float(np.sum(v * v)), x, 1e-5)
    assert np.all(np.abs(grad - 1.0) <= 1e-8)


@pytest.mark.parametrize("c", [-1.0, 0.5, 3.0])
def test_linear_function_recovers_slope(c):
    x = np.linspace(0.1, 0.9, 12).reshape(3, 4)
    grad = finite_difference_gradient(lambda v: float(c * np.sum(v)), x, 1e-5)
    assert np.all(np.abs(grad - c) <= 1e-9)


def test_oracle_matches_analytic_dice_gradient():
    rng = np.random.default_rng(9)
    pred = rng.dirichlet(np.ones(3), size=10).T
    target = np.zeros_like(pred)
    target[rng.integers(0, 3, 10), np.arange(10)] = 1.0
    result = dice_loss(pred, target, 1.0)
    numeric = finite_difference_gradient(
        lambda p: dice_loss(p, target, 1.0).value, pred, 1e-5
    )
    report = assert_gradients_match(result.grad, numeric, rel_tol=1e-5)
    assert report.passed


def test_non_finite_loss_reports_coordinate():
    x = np.full((2, 2), 0.5)

    def bad(v):
        if v[1, 1] != 0.5:
            return float("nan")
        return 1.0

    with pytest.raises(NumericalError, match=r"\(1, 1\)"):
        finite_difference_gradient(bad, x, 1e-5)


def test_identical_grids_pass_with_zero_error():
    g = np.arange(6.0).reshape(2, 3)
    report = assert_gradients_match(g, g.copy(), rel_tol=1e-5)
    assert report.passed
    assert report.max_rel_error == 0.0


def test_single_coordinate_violation_is_located():
    g = np.full((2, 3), 0.25)
    other = g.copy()
    other[1, 2] += 1e-3
    report = assert_gradients_match(other, g, rel_tol=1e-5, abs_floor=1e-8)
    assert not report.passed
    assert report.worst_coordinate == (1, 2)
    assert report.max_rel_error > 1e-5


def test_passed_flag_tracks_tolerance():
    a = np.array([[1.0, 1.0]])
    b = np.array([[1.0, 1.0 + 1e-6]])
    loose = assert_gradients_match(a, b, rel_tol=1e-3)
    tight = assert_gradients_match(a, b, rel_tol=1e-9)
    assert loose.passed and not tight.passed
    assert loose.max_rel_error == tight.max_rel_error


def test_shape_mismatch_rejected():
    with pytest.raises(DimensionError):
        assert_gradients_match(np.zeros((2, 2)), np.zeros((2, 3)), rel_tol=1e-5)


def test_near_zero_gradients_use_absolute_floor():
    a = np.array([[0.0, 1e-14]])
    b = np.array([[1e-14, 0.0]])
    # error is measured against the floor, not the vanishing gradients
    floored = assert_gradients_match(a, b, rel_tol=1e-5, abs_floor=1e-8)
    assert floored.passed
    assert floored.max_rel_error == pytest.approx(1e-6)
    unfloored = assert_gradients_match(a, b, rel_tol=1e-5, abs_floor=0.0)
    assert not unfloored.passed
