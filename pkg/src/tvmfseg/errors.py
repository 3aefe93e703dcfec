"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
data/format problems exit 2, numerical failures exit 3.
"""


class TvmfsegError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TvmfsegError, ValueError):
    """Invalid configuration: bad hyperparameters, indices, or file paths."""


class DimensionError(TvmfsegError, ValueError):
    """Array shapes are incompatible."""


class DomainError(TvmfsegError, ValueError):
    """A value lies outside its mathematical domain."""


class DegenerateInputError(DomainError):
    """Inputs make the operation undefined (e.g. zero norms without smoothing)."""


class DataError(TvmfsegError, ValueError):
    """Dataset content violates its contract (e.g. out-of-range labels)."""


class FormatError(DataError):
    """A serialized file is malformed; carries a byte offset when known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(TvmfsegError, ArithmeticError):
    """A computation produced non-finite values."""
