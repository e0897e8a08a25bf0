"""Exception hierarchy shared by every tacnet module."""


class TacError(Exception):
    """Base class for all tacnet errors."""


class DimensionError(TacError, ValueError):
    """Tensor shapes do not agree."""


class ConfigurationError(TacError, ValueError):
    """A configuration value or parameter layout is invalid."""


class NumericError(TacError, ArithmeticError):
    """A computation produced a non-finite value."""


class CheckpointError(TacError, ValueError):
    """A checkpoint or tensor file is malformed."""


class ConfigMismatchError(CheckpointError):
    """A checkpoint was written for a different configuration."""


class TrainingError(NumericError):
    """Training diverged."""
