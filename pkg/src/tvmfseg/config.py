"""Experiment configuration: a flat dataclass plus INI-file loading.

Config files use ``key = value`` lines under bracketed sections
([experiment], [model], [optimizer], [data]); command-line flags override
file values, which override defaults.
"""

import configparser
from dataclasses import dataclass, field, fields

from .errors import ConfigurationError
from .losses import LOSSES


def _opt_float(text):
    if text.strip().lower() in ("", "none"):
        return None
    return float(text)


def _bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


@dataclass
class ExperimentConfig:
    loss: str = "dice"
    gamma: float = 1.0
    kappa: float = None
    lam: float = None
    alpha: float = 0.7
    beta: float = 0.3
    focal_gamma: float = 4.0 / 3.0
    epochs: int = 10
    batch_size: int = 8
    seed: int = 0
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    augment: bool = False
    out_dir: str = "runs"
    in_channels: int = 1
    hidden_width: int = 16
    kernel_size: int = 3
    lr0: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 2e-4
    dataset_path: str = None
    num_samples: int = 250
    height: int = 64
    width: int = 64
    num_classes: int = 4
    imbalance_ratio: float = 16.0
    noise_sigma: float = 0.15

    def validate(self):
        if self.loss not in LOSSES:
            raise ConfigurationError(
                f"unknown loss {self.loss!r}; expected one of {sorted(LOSSES)}"
            )
        fractions = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f <= 0.0 for f in fractions):
            raise ConfigurationError(f"split fractions must be positive, got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ConfigurationError(
                f"split fractions must sum to 1, got {sum(fractions)!r}"
            )
        if self.loss == "t_vmf":
            if (self.kappa is None) == (self.lam is None):
                raise ConfigurationError(
                    "t_vmf loss needs exactly one of kappa (fixed) or lambda (adaptive)"
                )
        elif self.kappa is not None or self.lam is not None:
            raise ConfigurationError(
                f"kappa/lambda only apply to the t_vmf loss, not {self.loss!r}"
            )
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if self.gamma < 0.0:
            raise ConfigurationError(f"gamma must be >= 0, got {self.gamma}")
        return self

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


# section -> INI key -> (attribute, converter); "lambda" is spelled out in
# files and flags but stored as "lam" to stay clear of the Python keyword
_SCHEMA = {
    "experiment": {
        "loss": ("loss", str),
        "gamma": ("gamma", float),
        "kappa": ("kappa", _opt_float),
        "lambda": ("lam", _opt_float),
        "alpha": ("alpha", float),
        "beta": ("beta", float),
        "focal_gamma": ("focal_gamma", float),
        "epochs": ("epochs", int),
        "batch_size": ("batch_size", int),
        "seed": ("seed", int),
        "train_fraction": ("train_fraction", float),
        "val_fraction": ("val_fraction", float),
        "test_fraction": ("test_fraction", float),
        "augment": ("augment", _bool),
        "out_dir": ("out_dir", str),
    },
    "model": {
        "in_channels": ("in_channels", int),
        "hidden_width": ("hidden_width", int),
        "kernel_size": ("kernel_size", int),
    },
    "optimizer": {
        "lr0": ("lr0", float),
        "momentum": ("momentum", float),
        "weight_decay": ("weight_decay", float),
    },
    "data": {
        "dataset_path": ("dataset_path", str),
        "num_samples": ("num_samples", int),
        "height": ("height", int),
        "width": ("width", int),
        "num_classes": ("num_classes", int),
        "imbalance_ratio": ("imbalance_ratio", float),
        "noise_sigma": ("noise_sigma", float),
    },
}


def load_config(path=None, overrides=None):
    """Build a validated ExperimentConfig from defaults, an INI file, and overrides.

    ``overrides`` is a mapping of attribute name to value (already typed),
    typically collected from command-line flags.
    """
    config = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigurationError(
                    f"unknown config section [{section}] in {path}"
                )
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigurationError(
                        f"unknown key {key!r} in section [{section}] of {path}"
                    )
                attr, convert = _SCHEMA[section][key]
                try:
                    setattr(config, attr, convert(raw))
                except ValueError as exc:
                    raise ConfigurationError(
                        f"bad value for {section}.{key}: {raw!r} ({exc})"
                    ) from exc
    valid_names = {f.name for f in fields(ExperimentConfig)}
    for name, value in (overrides or {}).items():
        if name not in valid_names:
            raise ConfigurationError(f"unknown config field {name!r}")
        setattr(config, name, value)
    return config.validate()
