"""Run orchestration: training runs, evaluation, reports, and curve tables.

A RunRecord captures everything a run produced (resolved config, per-epoch
rows, the best epoch, a data-order digest, and the final test report) in
plain Python types so its JSON serialization is byte-deterministic.
"""

import csv
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .data import generate_dataset, DatasetSpec, load_dataset, split_indices
from .errors import ConfigurationError
from .estimator import ConvSegmenter
from .metrics import MetricsReport, overlap_counts, report_from_counts
from .model import forward, load_checkpoint
from .similarity import t_vmf_similarity

SPLIT_NAMES = ("train", "val", "test", "all")


@dataclass
class RunRecord:
    config: dict
    epoch_rows: list
    best_epoch: int
    best_val_mean_dsc: float
    data_order_digest: str
    test_report: dict

    def to_dict(self):
        return {
            "config": self.config,
            "epoch_rows": self.epoch_rows,
            "best_epoch": self.best_epoch,
            "best_val_mean_dsc": self.best_val_mean_dsc,
            "data_order_digest": self.data_order_digest,
            "test_report": self.test_report,
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(**{key: payload[key] for key in (
            "config", "epoch_rows", "best_epoch", "best_val_mean_dsc",
            "data_order_digest", "test_report",
        )})


def _pooled_report(params, images, labels, num_classes, batch_size, gamma=1.0):
    """MetricsReport over a split: counts pooled across all its pixels."""
    inter = np.zeros(num_classes, dtype=np.int64)
    pred_counts = np.zeros(num_classes, dtype=np.int64)
    gt_counts = np.zeros(num_classes, dtype=np.int64)
    for start in range(0, images.shape[0], batch_size):
        chunk = slice(start, start + batch_size)
        volume, _ = forward(params, images[chunk])
        i, p, g = overlap_counts(
            volume.argmax(axis=0), labels[chunk].reshape(-1), num_classes
        )
        inter += i
        pred_counts += p
        gt_counts += g
    return report_from_counts(inter, pred_counts, gt_counts, gamma)


def _load_or_generate(config):
    if config.dataset_path is not None:
        samples, num_classes = load_dataset(config.dataset_path)
        return samples, num_classes
    spec = DatasetSpec(
        num_samples=config.num_samples,
        height=config.height,
        width=config.width,
        num_classes=config.num_classes,
        imbalance_ratio=config.imbalance_ratio,
        noise_sigma=config.noise_sigma,
        seed=config.seed,
    )
    return generate_dataset(spec), spec.num_classes


def run_training(config, fold=None, verbose=0):
    """Execute one full training run; returns (RunRecord, fitted ConvSegmenter).

    ``fold`` re-seeds only the train/val/test split (seed + fold); model
    init, batch order and augmentation still derive from the config seed, so
    folds share everything except which samples land in which split.
    """
    config.validate()
    samples, num_classes = _load_or_generate(config)
    images = np.stack([s.image for s in samples])
    labels = np.stack([s.label for s in samples])
    split_seed = config.seed if fold is None else config.seed + fold
    fractions = (config.train_fraction, config.val_fraction, config.test_fraction)
    train_idx, val_idx, test_idx = split_indices(len(samples), fractions, split_seed)

    estimator = ConvSegmenter(
        loss=config.loss,
        gamma=config.gamma,
        kappa=config.kappa,
        lam=config.lam,
        alpha=config.alpha,
        beta=config.beta,
        focal_gamma=config.focal_gamma,
        num_classes=num_classes,
        in_channels=config.in_channels,
        hidden_width=config.hidden_width,
        kernel_size=config.kernel_size,
        epochs=config.epochs,
        batch_size=config.batch_size,
        lr0=config.lr0,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
        augment=config.augment,
        seed=config.seed,
        verbose=verbose,
    )
    estimator.fit(
        images[train_idx], labels[train_idx], images[val_idx], labels[val_idx]
    )

    test_report = _pooled_report(
        estimator.params_, images[test_idx], labels[test_idx],
        num_classes, config.batch_size,
    )
    digest = hashlib.sha256()
    for idx in (train_idx, val_idx, test_idx):
        digest.update(idx.astype(np.int64).tobytes())
    digest.update(estimator.data_order_digest_.encode("ascii"))

    record_config = config.to_dict()
    record_config["num_classes"] = num_classes
    record_config["fold"] = fold
    record = RunRecord(
        config=record_config,
        epoch_rows=estimator.history_,
        best_epoch=estimator.best_epoch_,
        best_val_mean_dsc=estimator.best_val_mean_dsc_,
        data_order_digest=digest.hexdigest(),
        test_report=test_report.to_dict(),
    )
    return record, estimator


def evaluate(checkpoint_path, dataset_path, split, fractions, seed, gamma=1.0,
             batch_size=8):
    """Score a saved checkpoint on one split of a dataset file."""
    if split not in SPLIT_NAMES:
        raise ConfigurationError(
            f"split must be one of {SPLIT_NAMES}, got {split!r}"
        )
    spec, params = load_checkpoint(checkpoint_path)
    samples, num_classes = load_dataset(dataset_path)
    if num_classes != spec.num_classes:
        raise ConfigurationError(
            f"checkpoint has {spec.num_classes} classes but dataset has {num_classes}"
        )
    images = np.stack([s.image for s in samples])
    labels = np.stack([s.label for s in samples])
    if split == "all":
        index = np.arange(len(samples))
    else:
        parts = split_indices(len(samples), fractions, seed)
        index = parts[SPLIT_NAMES.index(split)]
    return _pooled_report(
        params, images[index], labels[index], num_classes, batch_size, gamma
    )


def emit_similarity_curves(kappa_list, num_points, path):
    """Write a CSV of t-vMF similarity against cos theta over [0, 1].

    One row per evenly spaced cos theta value, one column per kappa; the
    kappa=0 column reproduces cos theta itself.
    """
    kappas = [float(k) for k in kappa_list]
    if not kappas:
        raise ConfigurationError("need at least one kappa value")
    if any(k < 0.0 for k in kappas):
        raise ConfigurationError(f"kappa values must be >= 0, got {kappas}")
    if num_points < 2:
        raise ConfigurationError(f"num_points must be >= 2, got {num_points}")
    cos_theta = np.linspace(0.0, 1.0, num_points)
    columns = [t_vmf_similarity(cos_theta, k) for k in kappas]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cos_theta"] + [f"phi_kappa_{k:g}" for k in kappas])
        for i in range(num_points):
            writer.writerow([repr(float(cos_theta[i]))]
                            + [repr(float(col[i])) for col in columns])
    return path


def write_report(record, out_dir):
    """Emit record.json (sorted-key JSON) and epochs.csv under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    record_path = os.path.join(out_dir, "record.json")
    with open(record_path, "w") as fh:
        json.dump(record.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    csv_path = os.path.join(out_dir, "epochs.csv")
    num_classes = int(record.config["num_classes"])
    header = (["epoch", "train_loss", "lr"]
              + [f"val_dsc_{c}" for c in range(num_classes)]
              + [f"kappa_{c}" for c in range(num_classes)])
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in record.epoch_rows:
            val = row["val_dsc"] if row["val_dsc"] is not None else [""] * num_classes
            writer.writerow(
                [row["epoch"], repr(row["train_loss"]), repr(row["lr"])]
                + [repr(v) if v != "" else "" for v in val]
                + [repr(k) for k in row["kappas"]]
            )
    return record_path, csv_path


def read_record(path):
    """Parse a record.json back into a RunRecord (inverse of write_report)."""
    with open(path) as fh:
        return RunRecord.from_dict(json.load(fh))


def summarize(record):
    """Human-readable key: value summary of a RunRecord."""
    lines = [
        f"loss: {record.config['loss']}",
        f"seed: {record.config['seed']}",
        f"epochs: {record.config['epochs']}",
        f"best_epoch: {record.best_epoch}",
        f"best_val_mean_dsc: {record.best_val_mean_dsc}",
        f"data_order_digest: {record.data_order_digest}",
        f"test_mean_dsc: {record.test_report['mean_dsc']}",
        f"test_foreground_mean_dsc: {record.test_report['foreground_mean_dsc']}",
    ]
    for c, value in enumerate(record.test_report["per_class_dsc"]):
        lines.append(f"test_dsc_class_{c}: {value}")
    return "\n".join(lines) + "\n"
