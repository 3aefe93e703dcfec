"""Adaptive per-class concentration schedule.

After each validation pass, a class's concentration for the next epoch is
its validation Dice score times an upper cap ``lam``:

    kappa[c] = lam * dsc[c]

Easy classes (high score) get a compact similarity; struggling classes fall
back toward plain cosine.  Every kappa starts at zero, so the first epoch
always trains with the widest similarity.  The mapping is stateless: only
the most recent score vector matters, and the raw history is kept for
analysis and reporting.
"""

import numpy as np

from .errors import ConfigurationError, DomainError


class KappaSchedule:
    """Holds the current per-class kappa vector and the update history."""

    def __init__(self, num_classes, lam):
        if num_classes < 2:
            raise ConfigurationError(f"need at least 2 classes, got {num_classes}")
        lam = float(lam)
        if lam < 0.0:
            raise ConfigurationError(f"lam must be >= 0, got {lam}")
        self.num_classes = int(num_classes)
        self.lam = lam
        self.kappas = np.zeros(self.num_classes)
        self.history = []

    def update_from_validation(self, dsc_per_class):
        """Recompute kappas from a fresh validation score vector."""
        dsc = np.asarray(dsc_per_class, dtype=np.float64)
        if dsc.shape != (self.num_classes,):
            raise ConfigurationError(
                f"expected {self.num_classes} scores, got shape {dsc.shape}"
            )
        if np.any(dsc < 0.0) or np.any(dsc > 1.0):
            raise DomainError(f"Dice scores must lie in [0, 1], got {dsc}")
        # rebind rather than mutate so readers holding the old vector see it frozen
        self.kappas = self.lam * dsc
        self.history.append((dsc.copy(), self.kappas.copy()))

    def kappa_for_class(self, class_index):
        index = int(class_index)
        if not 0 <= index < self.num_classes:
            raise ConfigurationError(
                f"class index {index} out of range for {self.num_classes} classes"
            )
        return float(self.kappas[index])
