"""ConvSegmenter estimator: sklearn API contract, training behavior, inference."""

import numpy as np
import pytest
from sklearn.base import clone

from tvmfseg import (
    ConfigurationError,
    ConvSegmenter,
    DataError,
    DatasetSpec,
    generate_dataset,
)


def toy_arrays(num_samples=12, size=16, num_classes=3, noise=0.0, seed=0):
    spec = DatasetSpec(num_samples=num_samples, height=size, width=size,
                       num_classes=num_classes, imbalance_ratio=4.0,
                       noise_sigma=noise, seed=seed)
    samples = generate_dataset(spec)
    X = np.stack([s.image for s in samples])
    y = np.stack([s.label for s in samples])
    return X, y


@pytest.fixture(scope="module")
def toy():
    return toy_arrays()


@pytest.fixture(scope="module")
def fitted(toy):
    X, y = toy
    est = ConvSegmenter(loss="dice", epochs=6, batch_size=4, hidden_width=8, seed=0)
    return est.fit(X[:8], y[:8], X[8:], y[8:])


class TestSklearnContract:
    def test_get_params_round_trip(self):
        est = ConvSegmenter(loss="t_vmf", lam=32.0, epochs=3)
        params = est.get_params()
        assert params["loss"] == "t_vmf"
        assert params["lam"] == 32.0
        rebuilt = ConvSegmenter(**params)
        assert rebuilt.get_params() == params

    def test_set_params(self):
        est = ConvSegmenter()
        est.set_params(loss="generalized_dice", epochs=2)
        assert est.loss == "generalized_dice" and est.epochs == 2
        with pytest.raises(ValueError):
            est.set_params(not_a_param=1)

    def test_clone_produces_unfitted_copy(self, fitted):
        copy = clone(fitted)
        assert copy.get_params() == fitted.get_params()
        assert not hasattr(copy, "params_")


class TestConfigErrors:
    def test_unknown_loss(self, toy):
        X, y = toy
        with pytest.raises(ConfigurationError, match="unknown loss"):
            ConvSegmenter(loss="jaccard", epochs=1).fit(X, y)

    def test_t_vmf_needs_exactly_one_concentration_source(self, toy):
        X, y = toy
        with pytest.raises(ConfigurationError, match="exactly one"):
            ConvSegmenter(loss="t_vmf", epochs=1).fit(X, y)
        with pytest.raises(ConfigurationError, match="exactly one"):
            ConvSegmenter(loss="t_vmf", kappa=2.0, lam=32.0, epochs=1).fit(X, y)

    def test_kappa_rejected_for_other_losses(self, toy):
        X, y = toy
        with pytest.raises(ConfigurationError, match="only apply"):
            ConvSegmenter(loss="dice", kappa=2.0, epochs=1).fit(X, y)

    def test_adaptive_needs_validation_split(self, toy):
        X, y = toy
        with pytest.raises(ConfigurationError, match="validation"):
            ConvSegmenter(loss="t_vmf", lam=32.0, epochs=1).fit(X, y)

    def test_val_arrays_must_come_together(self, toy):
        X, y = toy
        with pytest.raises(ConfigurationError, match="together"):
            ConvSegmenter(epochs=1).fit(X[:8], y[:8], X_val=X[8:])

    def test_mismatched_batch_sizes(self, toy):
        X, y = toy
        with pytest.raises(ConfigurationError):
            ConvSegmenter(epochs=1).fit(X[:4], y[:5])

    def test_float_labels_rejected(self, toy):
        X, y = toy
        with pytest.raises(DataError):
            ConvSegmenter(epochs=1).fit(X, y.astype(np.float64))

    def test_predict_before_fit(self, toy):
        X, _ = toy
        with pytest.raises(ConfigurationError, match="not fitted"):
            ConvSegmenter().predict(X)


class TestFit:
    def test_fitted_attributes(self, fitted):
        np.testing.assert_array_equal(fitted.classes_, [0, 1, 2])
        assert fitted.model_spec_.num_classes == 3
        assert len(fitted.history_) == 6
        assert 1 <= fitted.best_epoch_ <= 6
        assert 0.0 <= fitted.best_val_mean_dsc_ <= 1.0
        assert len(fitted.data_order_digest_) == 64
        assert fitted.n_iterations_ == 6 * 2  # 8 samples / batch 4 * 6 epochs

    def test_history_rows_are_complete(self, fitted):
        for row in fitted.history_:
            assert set(row) == {"epoch", "train_loss", "lr", "val_dsc", "kappas"}
            assert np.isfinite(row["train_loss"])
            assert len(row["val_dsc"]) == 3
            assert row["kappas"] == [0.0, 0.0, 0.0]  # dice logs zeros

    def test_best_val_matches_history(self, fitted):
        means = [float(np.mean(row["val_dsc"])) for row in fitted.history_]
        assert fitted.best_val_mean_dsc_ == max(means)
        assert fitted.best_epoch_ == means.index(max(means)) + 1

    def test_num_classes_inferred_from_labels(self, toy):
        X, y = toy
        est = ConvSegmenter(epochs=1, batch_size=4, hidden_width=4).fit(X, y)
        assert est.model_spec_.num_classes == int(y.max()) + 1

    def test_no_validation_split_keeps_final_params(self, toy):
        X, y = toy
        est = ConvSegmenter(epochs=2, batch_size=4, hidden_width=4, seed=1).fit(X, y)
        assert est.best_val_mean_dsc_ is None
        assert est.best_epoch_ == 2
        for a, b in zip(est.params_.arrays(), est.final_params_.arrays()):
            np.testing.assert_array_equal(a, b)
        for row in est.history_:
            assert row["val_dsc"] is None

    def test_refit_is_bit_identical(self, toy):
        X, y = toy

        def run():
            est = ConvSegmenter(loss="t_vmf", lam=8.0, epochs=3, batch_size=4,
                                hidden_width=8, seed=3)
            est.fit(X[:8], y[:8], X[8:], y[8:])
            return est

        a, b = run(), run()
        for x, z in zip(a.params_.arrays(), b.params_.arrays()):
            np.testing.assert_array_equal(x, z)
        assert a.history_ == b.history_
        assert a.data_order_digest_ == b.data_order_digest_

    def test_data_order_digest_independent_of_loss(self, toy):
        X, y = toy
        digests = set()
        for kw in (dict(loss="dice"), dict(loss="t_vmf", kappa=4.0),
                   dict(loss="focal_tversky")):
            est = ConvSegmenter(epochs=2, batch_size=4, hidden_width=4, seed=5, **kw)
            est.fit(X[:8], y[:8], X[8:], y[8:])
            digests.add(est.data_order_digest_)
        assert len(digests) == 1

    def test_adaptive_kappa_rows_follow_validation_dsc(self, toy):
        X, y = toy
        est = ConvSegmenter(loss="t_vmf", lam=16.0, epochs=4, batch_size=4,
                            hidden_width=8, seed=0)
        est.fit(X[:8], y[:8], X[8:], y[8:])
        rows = est.history_
        assert rows[0]["kappas"] == [0.0, 0.0, 0.0]
        for prev, cur in zip(rows, rows[1:]):
            expected = [16.0 * d for d in prev["val_dsc"]]
            assert cur["kappas"] == expected

    def test_fixed_kappa_logged_every_epoch(self, toy):
        X, y = toy
        est = ConvSegmenter(loss="t_vmf", kappa=2.0, epochs=2, batch_size=4,
                            hidden_width=4, seed=0)
        est.fit(X[:8], y[:8], X[8:], y[8:])
        for row in est.history_:
            assert row["kappas"] == [2.0, 2.0, 2.0]

    def test_learning_rate_decays_across_epochs(self, fitted):
        lrs = [row["lr"] for row in fitted.history_]
        assert lrs[0] == 0.01
        assert all(a > b for a, b in zip(lrs, lrs[1:]))

    def test_augment_path_runs(self, toy):
        X, y = toy
        est = ConvSegmenter(epochs=2, batch_size=4, hidden_width=4, seed=0,
                            augment=True)
        est.fit(X[:8], y[:8], X[8:], y[8:])
        assert np.isfinite(est.history_[-1]["train_loss"])


class TestInference:
    def test_predict_proba_is_a_simplex(self, fitted, toy):
        X, _ = toy
        probs = fitted.predict_proba(X[:3])
        assert probs.shape == (3, 3, 16, 16)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert probs.min() > 0.0

    def test_predict_matches_proba_argmax(self, fitted, toy):
        X, _ = toy
        pred = fitted.predict(X[:3])
        assert pred.shape == (3, 16, 16)
        np.testing.assert_array_equal(pred, fitted.predict_proba(X[:3]).argmax(axis=1))

    def test_score_in_unit_range_and_learning_happened(self, toy):
        X, y = toy
        short = ConvSegmenter(epochs=1, batch_size=4, hidden_width=8, seed=0)
        short.fit(X[:8], y[:8], X[8:], y[8:])
        long = ConvSegmenter(epochs=20, batch_size=4, hidden_width=8, seed=0)
        long.fit(X[:8], y[:8], X[8:], y[8:])
        for est in (short, long):
            assert 0.0 <= est.score(X[:8], y[:8]) <= 1.0
        assert long.score(X[:8], y[:8]) > short.score(X[:8], y[:8])

    def test_single_image_convenience_shapes(self, fitted, toy):
        X, _ = toy
        probs = fitted.predict_proba(X[0])
        assert probs.shape == (1, 3, 16, 16)
