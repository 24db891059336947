"""Exception types raised across the fitting pipeline."""


class FitError(Exception):
    """Base class for all sdfit errors."""


class DegenerateInput(FitError):
    """A point configuration does not determine a unique model."""


class SingularModel(FitError):
    """A model matrix is numerically non-invertible."""


class InvalidArgument(FitError, ValueError):
    pass


class OutOfBounds(FitError, IndexError):
    pass


class NoHypotheses(FitError):
    """No group produced a usable model hypothesis."""


class InsufficientData(FitError):
    pass


class LengthMismatch(FitError, ValueError):
    pass


class InvalidSpec(FitError, ValueError):
    pass


class ModelDeficit(UserWarning):
    """Fewer models were selected than requested."""
