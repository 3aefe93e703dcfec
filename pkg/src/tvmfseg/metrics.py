"""Dice score evaluation on hard segmentation masks.

Evaluation always goes through argmax masks; the smoothed count form

    DSC_c = (2 |P_c & G_c| + gamma) / (|P_c| + |G_c| + gamma)

with gamma = 1 scores classes absent from both masks as 1.0, keeping the
per-class vector fixed-length for the kappa schedule.  Counts are plain
integers, so per-image counts can be summed across a split and divided once.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError
from .validation import check_prob_volume


@dataclass
class MetricsReport:
    per_class_dsc: list
    mean_dsc: float
    foreground_mean_dsc: float
    pixel_counts: list = field(default_factory=list)

    def to_dict(self):
        return {
            "per_class_dsc": list(self.per_class_dsc),
            "mean_dsc": self.mean_dsc,
            "foreground_mean_dsc": self.foreground_mean_dsc,
            "pixel_counts": list(self.pixel_counts),
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            per_class_dsc=[float(v) for v in payload["per_class_dsc"]],
            mean_dsc=float(payload["mean_dsc"]),
            foreground_mean_dsc=float(payload["foreground_mean_dsc"]),
            pixel_counts=[int(v) for v in payload["pixel_counts"]],
        )


def hard_masks(pred):
    """Per-pixel argmax class indices; ties go to the lowest class index."""
    pred = check_prob_volume(pred)
    return np.argmax(pred, axis=0)


def overlap_counts(pred_mask, gt_mask, num_classes):
    """Per-class (intersection, |P|, |G|) pixel counts as int64 arrays."""
    pred_mask = np.asarray(pred_mask)
    gt_mask = np.asarray(gt_mask)
    if pred_mask.shape != gt_mask.shape:
        raise DimensionError(
            f"mask shapes differ: {pred_mask.shape} vs {gt_mask.shape}"
        )
    pred_flat = pred_mask.reshape(-1)
    gt_flat = gt_mask.reshape(-1)
    pred_counts = np.bincount(pred_flat, minlength=num_classes)[:num_classes]
    gt_counts = np.bincount(gt_flat, minlength=num_classes)[:num_classes]
    agree = pred_flat == gt_flat
    inter = np.bincount(gt_flat[agree], minlength=num_classes)[:num_classes]
    return inter.astype(np.int64), pred_counts.astype(np.int64), gt_counts.astype(np.int64)


def dsc_from_counts(inter, pred_counts, gt_counts, gamma=1.0):
    gamma = float(gamma)
    if gamma < 0.0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    inter = np.asarray(inter, dtype=np.float64)
    union = np.asarray(pred_counts, dtype=np.float64) + np.asarray(gt_counts, dtype=np.float64)
    return (2.0 * inter + gamma) / (union + gamma)


def dsc_per_class(pred_mask, gt_mask, num_classes, gamma=1.0):
    """Smoothed per-class Dice between two hard masks."""
    inter, pred_counts, gt_counts = overlap_counts(pred_mask, gt_mask, num_classes)
    return dsc_from_counts(inter, pred_counts, gt_counts, gamma)


def report_from_counts(inter, pred_counts, gt_counts, gamma=1.0):
    """Assemble a MetricsReport from pooled per-class counts."""
    dsc = dsc_from_counts(inter, pred_counts, gt_counts, gamma)
    return MetricsReport(
        per_class_dsc=[float(v) for v in dsc],
        mean_dsc=float(dsc.mean()),
        foreground_mean_dsc=float(dsc[1:].mean()),
        pixel_counts=[int(v) for v in np.asarray(gt_counts)],
    )


def build_report(pred, target, gamma=1.0):
    """Full report for one prediction volume against its one-hot target."""
    pred = check_prob_volume(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"shapes differ: {pred.shape} vs {target.shape}")
    num_classes = pred.shape[0]
    pred_mask = hard_masks(pred)
    gt_mask = np.argmax(target, axis=0)
    inter, pred_counts, gt_counts = overlap_counts(pred_mask, gt_mask, num_classes)
    return report_from_counts(inter, pred_counts, gt_counts, gamma)
