"""Model and optimizer: shapes, determinism, backprop vs oracle, persistence."""

import numpy as np
import pytest

from tvmfseg import (
    ConfigurationError,
    FormatError,
    ModelSpec,
    NumericalError,
    assert_gradients_match,
    backward,
    dice_loss,
    finite_difference_gradient,
    forward,
    init_model,
    init_optimizer,
    load_checkpoint,
    lr_at,
    one_hot_encode,
    save_checkpoint,
    sgd_step,
    t_vmf_dice_loss,
)
from tvmfseg.model import POLY_DECAY_POWER


def small_setup(seed=7, hidden=5, size=8):
    spec = ModelSpec(in_channels=1, num_classes=4, hidden_width=hidden,
                     kernel_size=3, seed=seed)
    params = init_model(spec)
    rng = np.random.default_rng(seed)
    images = rng.random((2, size, size))
    labels = rng.integers(0, 4, (2, size, size))
    return spec, params, images, labels


def set_flat(params, flat):
    out = params.copy()
    i = 0
    for a in out.arrays():
        a.flat[:] = flat[i:i + a.size]
        i += a.size
    return out


class TestModelSpec:
    def test_invalid_specs_rejected(self):
        with pytest.raises(ConfigurationError):
            ModelSpec(kernel_size=4)
        with pytest.raises(ConfigurationError):
            ModelSpec(num_classes=1)
        with pytest.raises(ConfigurationError):
            ModelSpec(hidden_width=0)
        with pytest.raises(ConfigurationError):
            ModelSpec(in_channels=0)


class TestInitModel:
    def test_same_seed_is_bit_identical(self):
        a = init_model(ModelSpec(seed=3))
        b = init_model(ModelSpec(seed=3))
        for x, y in zip(a.arrays(), b.arrays()):
            np.testing.assert_array_equal(x, y)

    def test_different_seeds_differ(self):
        a = init_model(ModelSpec(seed=3))
        b = init_model(ModelSpec(seed=4))
        assert not np.array_equal(a.w1, b.w1)

    def test_layer_one_weight_count(self):
        params = init_model(ModelSpec(in_channels=1, hidden_width=16, kernel_size=3))
        assert params.w1.size == 144

    def test_scale_and_zero_biases(self):
        params = init_model(ModelSpec(in_channels=1, hidden_width=16, kernel_size=3))
        assert np.all(np.abs(params.w1) <= 1.0 / 3.0)
        assert np.all(params.b1 == 0.0) and np.all(params.b2 == 0.0)


class TestForward:
    def test_probabilities_sum_to_one(self):
        _, params, images, _ = small_setup()
        volume, _ = forward(params, images)
        assert volume.shape == (4, 2 * 8 * 8)
        np.testing.assert_allclose(volume.sum(axis=0), 1.0, atol=1e-9)
        assert np.all(volume > 0.0) and np.all(volume < 1.0)

    def test_zero_weights_give_uniform_probabilities(self):
        spec, params, images, _ = small_setup()
        for a in params.arrays():
            a[...] = 0.0
        volume, _ = forward(params, images)
        np.testing.assert_array_equal(volume, np.full_like(volume, 0.25))

    def test_spatial_size_preserved(self):
        _, params, _, _ = small_setup()
        rng = np.random.default_rng(0)
        for h, w in ((5, 9), (16, 4)):
            volume, _ = forward(params, rng.random((3, h, w)))
            assert volume.shape == (4, 3 * h * w)

    def test_non_finite_input_rejected(self):
        _, params, images, _ = small_setup()
        images = images.copy()
        images[0, 0, 0] = np.inf
        with pytest.raises(NumericalError):
            forward(params, images)

    def test_deterministic(self):
        _, params, images, _ = small_setup()
        a, _ = forward(params, images)
        b, _ = forward(params, images)
        np.testing.assert_array_equal(a, b)


class TestBackward:
    def test_zero_output_gradient_gives_zero_parameter_gradients(self):
        _, params, images, _ = small_setup()
        volume, cache = forward(params, images)
        grads = backward(params, cache, np.zeros_like(volume))
        for g in grads.arrays():
            assert np.all(g == 0.0)

    def test_linearity_in_output_gradient(self):
        _, params, images, _ = small_setup()
        volume, cache = forward(params, images)
        rng = np.random.default_rng(1)
        gp = rng.standard_normal(volume.shape)
        single = backward(params, cache, gp)
        double = backward(params, cache, 2.0 * gp)
        for g1, g2 in zip(single.arrays(), double.arrays()):
            np.testing.assert_allclose(2.0 * g1, g2, rtol=1e-12, atol=0.0)

    def test_gradient_shape_mismatch_rejected(self):
        _, params, images, _ = small_setup()
        _, cache = forward(params, images)
        with pytest.raises(ConfigurationError):
            backward(params, cache, np.zeros((4, 7)))

    def test_end_to_end_gradient_matches_oracle(self):
        spec, params, images, labels = small_setup(size=8)
        images, labels = images[:1], labels[:1]
        target = one_hot_encode(labels, 4)

        def loss_of(flat):
            volume, _ = forward(set_flat(params, flat), images)
            return t_vmf_dice_loss(volume, target, 8.0, 1.0).value

        volume, cache = forward(params, images)
        result = t_vmf_dice_loss(volume, target, 8.0, 1.0)
        analytic = backward(params, cache, result.grad).flat()
        numeric = finite_difference_gradient(loss_of, params.flat(), 1e-5)
        report = assert_gradients_match(analytic, numeric, rel_tol=1e-4)
        assert report.passed, report


class TestLearningRate:
    def test_initial_rate(self):
        state = init_optimizer(init_model(ModelSpec()), iteration_max=100)
        assert lr_at(state) == 0.01

    def test_final_rate_is_zero(self):
        state = init_optimizer(init_model(ModelSpec()), iteration_max=100)
        state.iteration = 100
        assert lr_at(state) == 0.0

    def test_halfway_value(self):
        state = init_optimizer(init_model(ModelSpec()), iteration_max=100)
        state.iteration = 50
        assert lr_at(state) == pytest.approx(0.01 * 0.5 ** POLY_DECAY_POWER)
        assert lr_at(state) == pytest.approx(0.005359, abs=5e-7)

    def test_iteration_beyond_max_rejected(self):
        state = init_optimizer(init_model(ModelSpec()), iteration_max=10)
        state.iteration = 11
        with pytest.raises(ConfigurationError):
            lr_at(state)


class TestSgdStep:
    def test_zero_gradients_without_decay_are_a_no_op(self):
        params = init_model(ModelSpec(seed=1))
        state = init_optimizer(params, weight_decay=0.0, iteration_max=10)
        before = params.copy()
        zero = init_optimizer(params, iteration_max=10).momentum_buffers
        sgd_step(params, zero, state)
        for a, b in zip(params.arrays(), before.arrays()):
            np.testing.assert_array_equal(a, b)
        assert state.iteration == 1

    def test_reduces_to_plain_gradient_descent(self):
        params = init_model(ModelSpec(seed=2))
        state = init_optimizer(params, lr0=0.5, momentum=0.0, weight_decay=0.0,
                               iteration_max=10)
        grads = params.copy()
        expected = [a - 0.5 * g for a, g in zip(params.arrays(), grads.arrays())]
        sgd_step(params, grads, state)
        for a, e in zip(params.arrays(), expected):
            np.testing.assert_allclose(a, e, rtol=1e-15)

    def test_weight_decay_only(self):
        params = init_model(ModelSpec(seed=3))
        params.w1[...] = 1.0
        state = init_optimizer(params, lr0=0.01, weight_decay=2e-4, iteration_max=10)
        zero = init_optimizer(params, iteration_max=10).momentum_buffers
        sgd_step(params, zero, state)
        np.testing.assert_allclose(params.w1, 0.999998, rtol=1e-12)

    def test_non_finite_gradients_abort_with_iteration(self):
        params = init_model(ModelSpec(seed=4))
        state = init_optimizer(params, iteration_max=10)
        state.iteration = 3
        grads = params.copy()
        grads.w2[0, 0, 0, 0] = np.nan
        with pytest.raises(NumericalError, match="iteration 3"):
            sgd_step(params, grads, state)

    def test_trajectory_is_deterministic(self):
        def run():
            spec, params, images, labels = small_setup(seed=11)
            state = init_optimizer(params, iteration_max=20)
            target = one_hot_encode(labels, 4)
            for _ in range(5):
                volume, cache = forward(params, images)
                result = dice_loss(volume, target, 1.0)
                sgd_step(params, backward(params, cache, result.grad), state)
            return params

        a, b = run(), run()
        for x, y in zip(a.arrays(), b.arrays()):
            np.testing.assert_array_equal(x, y)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        spec, params, _, _ = small_setup(seed=5)
        path = tmp_path / "model.tvmf"
        save_checkpoint(path, spec, params)
        spec2, params2 = load_checkpoint(path)
        assert spec2 == spec
        for a, b in zip(params.arrays(), params2.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_corrupted_magic(self, tmp_path):
        spec, params, _, _ = small_setup()
        path = tmp_path / "model.tvmf"
        save_checkpoint(path, spec, params)
        raw = bytearray(path.read_bytes())
        raw[0] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_truncated_payload_reports_offset(self, tmp_path):
        spec, params, _, _ = small_setup()
        path = tmp_path / "model.tvmf"
        save_checkpoint(path, spec, params)
        raw = path.read_bytes()
        path.write_bytes(raw[:-16])
        with pytest.raises(FormatError) as excinfo:
            load_checkpoint(path)
        assert excinfo.value.offset is not None

    def test_trailing_bytes_rejected(self, tmp_path):
        spec, params, _, _ = small_setup()
        path = tmp_path / "model.tvmf"
        save_checkpoint(path, spec, params)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(FormatError):
            load_checkpoint(path)
