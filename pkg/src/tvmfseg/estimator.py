"""Scikit-learn style estimator wrapping the conv model and training loop.

ConvSegmenter.fit runs the epoch loop: train every batch with the kappa
vector currently in force, score the validation split, then let the adaptive
schedule recompute kappas from those scores.  The best-validation-mean-DSC
parameters are kept for prediction.
"""

import hashlib
import math

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConfigurationError, NumericalError
from .losses import (
    LOSSES,
    dice_loss,
    focal_tversky_loss,
    generalized_dice_loss,
    normalized_dice_loss,
    t_vmf_dice_loss,
)
from .metrics import dsc_from_counts, overlap_counts
from .model import (
    ModelSpec,
    backward,
    forward,
    init_model,
    init_optimizer,
    lr_at,
    sgd_step,
)
from .data import Sample, augment, one_hot_encode
from .schedule import KappaSchedule
from .validation import check_image_batch, check_label_batch


class ConvSegmenter(BaseEstimator):
    """Two-layer convolutional segmenter trained with a pluggable Dice-family loss.

    Parameters mirror the experiment configuration: ``loss`` picks one of
    ``dice``, ``normalized_dice``, ``t_vmf``, ``generalized_dice`` or
    ``focal_tversky``; for ``t_vmf`` exactly one of ``kappa`` (fixed
    concentration) or ``lam`` (adaptive cap, kappa = lam * validation DSC
    per class) must be given.  Training is deterministic given ``seed``:
    model init, batch order and augmentation draw from separate seeded
    streams, none of which depend on the loss choice.
    """

    def __init__(
        self,
        loss="dice",
        gamma=1.0,
        kappa=None,
        lam=None,
        alpha=0.7,
        beta=0.3,
        focal_gamma=4.0 / 3.0,
        num_classes=None,
        in_channels=1,
        hidden_width=16,
        kernel_size=3,
        epochs=10,
        batch_size=8,
        lr0=0.01,
        momentum=0.9,
        weight_decay=2e-4,
        augment=False,
        seed=0,
        verbose=0,
    ):
        self.loss = loss
        self.gamma = gamma
        self.kappa = kappa
        self.lam = lam
        self.alpha = alpha
        self.beta = beta
        self.focal_gamma = focal_gamma
        self.num_classes = num_classes
        self.in_channels = in_channels
        self.hidden_width = hidden_width
        self.kernel_size = kernel_size
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr0 = lr0
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.augment = augment
        self.seed = seed
        self.verbose = verbose

    # -- parameter checks ---------------------------------------------------

    def _check_config(self):
        if self.loss not in LOSSES:
            raise ConfigurationError(
                f"unknown loss {self.loss!r}; expected one of {sorted(LOSSES)}"
            )
        if self.loss == "t_vmf":
            if (self.kappa is None) == (self.lam is None):
                raise ConfigurationError(
                    "t_vmf loss needs exactly one of kappa (fixed) or lam (adaptive)"
                )
        elif self.kappa is not None or self.lam is not None:
            raise ConfigurationError(
                f"kappa/lam only apply to the t_vmf loss, not {self.loss!r}"
            )
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")

    def _loss_value(self, probs, targets, kappas):
        if self.loss == "dice":
            return dice_loss(probs, targets, self.gamma)
        if self.loss == "normalized_dice":
            return normalized_dice_loss(probs, targets, self.gamma)
        if self.loss == "t_vmf":
            return t_vmf_dice_loss(probs, targets, kappas, self.gamma)
        if self.loss == "generalized_dice":
            return generalized_dice_loss(probs, targets, self.gamma)
        return focal_tversky_loss(
            probs, targets, self.alpha, self.beta, self.focal_gamma, self.gamma
        )

    # -- training -----------------------------------------------------------

    def fit(self, X, y, X_val=None, y_val=None):
        """Train on (X, y); track per-epoch validation DSC when a val split is given.

        X: images (B, H, W) or (B, C, H, W); y: integer labels (B, H, W).
        Returns self.  After fitting, ``params_`` holds the parameters of the
        best validation epoch (final epoch when no validation split).
        """
        self._check_config()
        if (X_val is None) != (y_val is None):
            raise ConfigurationError("X_val and y_val must be given together")
        if self.loss == "t_vmf" and self.lam is not None and X_val is None:
            raise ConfigurationError("adaptive kappa (lam) requires a validation split")

        images = check_image_batch(X)
        if self.num_classes is not None:
            num_classes = int(self.num_classes)
        else:
            num_classes = int(np.asarray(y).max()) + 1
        labels = check_label_batch(y, num_classes)
        if images.shape[0] != labels.shape[0]:
            raise ConfigurationError(
                f"got {images.shape[0]} images but {labels.shape[0]} label maps"
            )
        if X_val is not None:
            val_images = check_image_batch(X_val)
            val_labels = check_label_batch(y_val, num_classes)

        spec = ModelSpec(
            in_channels=images.shape[1],
            num_classes=num_classes,
            hidden_width=self.hidden_width,
            kernel_size=self.kernel_size,
            seed=self.seed,
        )
        params = init_model(spec)
        n_train = images.shape[0]
        batches_per_epoch = math.ceil(n_train / self.batch_size)
        state = init_optimizer(
            params,
            lr0=self.lr0,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            iteration_max=self.epochs * batches_per_epoch,
        )

        # batch order and augmentation use streams independent of the loss
        # choice so that swapping losses leaves the data pipeline identical
        shuffle_rng = np.random.default_rng(self.seed + 1)
        augment_rng = np.random.default_rng(self.seed + 2)
        schedule = None
        if self.loss == "t_vmf" and self.lam is not None:
            schedule = KappaSchedule(num_classes, self.lam)
        order_hash = hashlib.sha256()

        history = []
        best_params = None
        best_mean = -1.0
        best_epoch = self.epochs
        for epoch in range(1, self.epochs + 1):
            kappas = self._kappas_in_force(schedule, num_classes)
            epoch_lr = lr_at(state)
            order = shuffle_rng.permutation(n_train)
            order_hash.update(order.astype(np.int64).tobytes())
            batch_losses = []
            for start in range(0, n_train, self.batch_size):
                batch_idx = order[start : start + self.batch_size]
                batch_images, batch_labels = self._load_batch(
                    images, labels, batch_idx, augment_rng
                )
                volume, cache = forward(params, batch_images)
                targets = one_hot_encode(batch_labels, num_classes)
                result = self._loss_value(volume, targets, kappas)
                if not np.isfinite(result.value):
                    raise NumericalError(
                        f"non-finite loss {result.value!r} at epoch {epoch}, "
                        f"batch {start // self.batch_size}"
                    )
                grads = backward(params, cache, result.grad)
                sgd_step(params, grads, state)
                batch_losses.append(result.value)
            train_loss = float(np.mean(batch_losses))

            val_dsc = None
            if X_val is not None:
                val_dsc = self._pooled_dsc(params, val_images, val_labels, num_classes)
                mean_dsc = float(val_dsc.mean())
                if mean_dsc > best_mean:
                    best_mean = mean_dsc
                    best_params = params.copy()
                    best_epoch = epoch
                if schedule is not None:
                    schedule.update_from_validation(val_dsc)
            history.append(
                {
                    "epoch": epoch,
                    "train_loss": train_loss,
                    "lr": epoch_lr,
                    "val_dsc": None if val_dsc is None else [float(v) for v in val_dsc],
                    "kappas": [float(k) for k in kappas],
                }
            )
            if self.verbose:
                tail = ""
                if val_dsc is not None:
                    tail = f" val_mean_dsc={float(val_dsc.mean()):.4f}"
                print(
                    f"epoch {epoch}/{self.epochs} train_loss={train_loss:.6f}"
                    f" lr={epoch_lr:.6f}{tail}"
                )

        self.classes_ = np.arange(num_classes)
        self.model_spec_ = spec
        self.params_ = params if best_params is None else best_params
        self.final_params_ = params
        self.history_ = history
        self.best_epoch_ = best_epoch
        self.best_val_mean_dsc_ = None if X_val is None else best_mean
        self.data_order_digest_ = order_hash.hexdigest()
        self.n_iterations_ = state.iteration
        return self

    def _kappas_in_force(self, schedule, num_classes):
        if schedule is not None:
            return schedule.kappas
        if self.loss == "t_vmf":
            return np.full(num_classes, float(self.kappa))
        # logged as zeros for losses without a concentration parameter
        return np.zeros(num_classes)

    def _load_batch(self, images, labels, batch_idx, augment_rng):
        batch_images = images[batch_idx]
        batch_labels = labels[batch_idx]
        if not self.augment:
            return batch_images, batch_labels
        out_images = batch_images.copy()
        out_labels = batch_labels.copy()
        for i in range(batch_idx.size):
            sample = augment(
                Sample(image=batch_images[i, 0], label=batch_labels[i]), augment_rng
            )
            out_images[i, 0] = sample.image
            out_labels[i] = sample.label
        return out_images, out_labels

    def _pooled_dsc(self, params, images, labels, num_classes):
        inter = np.zeros(num_classes, dtype=np.int64)
        pred_counts = np.zeros(num_classes, dtype=np.int64)
        gt_counts = np.zeros(num_classes, dtype=np.int64)
        for start in range(0, images.shape[0], self.batch_size):
            chunk = slice(start, start + self.batch_size)
            volume, _ = forward(params, images[chunk])
            i, p, g = overlap_counts(
                volume.argmax(axis=0), labels[chunk].reshape(-1), num_classes
            )
            inter += i
            pred_counts += p
            gt_counts += g
        return dsc_from_counts(inter, pred_counts, gt_counts, gamma=1.0)

    # -- inference ----------------------------------------------------------

    def _require_fitted(self):
        if not hasattr(self, "params_"):
            raise ConfigurationError("estimator is not fitted; call fit first")

    def predict_proba(self, X):
        """Per-pixel class probabilities, shaped (B, C, H, W)."""
        self._require_fitted()
        images = check_image_batch(X)
        batch, _, height, width = images.shape
        num_classes = self.model_spec_.num_classes
        out = np.empty((batch, num_classes, height, width))
        for start in range(0, batch, self.batch_size):
            chunk = slice(start, min(start + self.batch_size, batch))
            volume, _ = forward(self.params_, images[chunk])
            n = chunk.stop - chunk.start
            out[chunk] = volume.reshape(num_classes, n, height, width).transpose(1, 0, 2, 3)
        return out

    def predict(self, X):
        """Hard label maps, shaped (B, H, W); argmax ties go to the lowest class."""
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X, y):
        """Mean DSC over all classes, pooled over the batch (gamma = 1)."""
        self._require_fitted()
        images = check_image_batch(X)
        labels = check_label_batch(y, self.model_spec_.num_classes)
        dsc = self._pooled_dsc(
            self.params_, images, labels, self.model_spec_.num_classes
        )
        return float(dsc.mean())
