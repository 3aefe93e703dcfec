"""Dice-family segmentation losses built on the t-vMF similarity.

The package bundles the loss family (with analytic gradients and a
finite-difference oracle), the adaptive per-class concentration schedule,
Dice-score metrics, a minimal from-scratch convolutional segmenter with an
sklearn-style estimator wrapper, synthetic imbalanced datasets, and a CLI
harness for desk-scale experiments.
"""

from .errors import (
    ConfigurationError,
    DataError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    FormatError,
    NumericalError,
    TvmfsegError,
)
from .similarity import (
    cosine_similarity,
    cosine_similarity_gradient,
    t_vmf_similarity,
    t_vmf_similarity_derivative,
)
from .losses import (
    LOSSES,
    LossResult,
    dice_loss,
    focal_tversky_loss,
    generalized_dice_loss,
    normalized_dice_loss,
    t_vmf_dice_loss,
)
from .gradcheck import GradCheckReport, assert_gradients_match, finite_difference_gradient
from .schedule import KappaSchedule
from .metrics import MetricsReport, build_report, dsc_per_class, hard_masks
from .model import (
    ModelParams,
    ModelSpec,
    OptimizerState,
    backward,
    forward,
    init_model,
    init_optimizer,
    load_checkpoint,
    lr_at,
    save_checkpoint,
    sgd_step,
)
from .data import (
    DatasetSpec,
    Sample,
    apply_flip,
    apply_rotation,
    augment,
    generate_dataset,
    generate_sample,
    load_dataset,
    one_hot_encode,
    save_dataset,
    split_indices,
)
from .estimator import ConvSegmenter
from .config import ExperimentConfig, load_config
from .experiment import (
    RunRecord,
    emit_similarity_curves,
    evaluate,
    read_record,
    run_training,
    write_report,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DataError",
    "DegenerateInputError",
    "DimensionError",
    "DomainError",
    "FormatError",
    "NumericalError",
    "TvmfsegError",
    "cosine_similarity",
    "cosine_similarity_gradient",
    "t_vmf_similarity",
    "t_vmf_similarity_derivative",
    "LOSSES",
    "LossResult",
    "dice_loss",
    "focal_tversky_loss",
    "generalized_dice_loss",
    "normalized_dice_loss",
    "t_vmf_dice_loss",
    "GradCheckReport",
    "assert_gradients_match",
    "finite_difference_gradient",
    "KappaSchedule",
    "MetricsReport",
    "build_report",
    "dsc_per_class",
    "hard_masks",
    "ModelParams",
    "ModelSpec",
    "OptimizerState",
    "backward",
    "forward",
    "init_model",
    "init_optimizer",
    "load_checkpoint",
    "lr_at",
    "save_checkpoint",
    "sgd_step",
    "DatasetSpec",
    "Sample",
    "apply_flip",
    "apply_rotation",
    "augment",
    "generate_dataset",
    "generate_sample",
    "load_dataset",
    "one_hot_encode",
    "save_dataset",
    "split_indices",
    "ConvSegmenter",
    "ExperimentConfig",
    "load_config",
    "RunRecord",
    "emit_similarity_curves",
    "evaluate",
    "read_record",
    "run_training",
    "write_report",
]
