"""Exception types shared across the toolkit.

The hierarchy is deliberately small: callers that want to distinguish
"your input is bad" from "the numerics gave up" catch ``ValidationError``
(or its siblings) versus ``NumericalError``. The CLI maps the first group
to exit status 1 and the second to exit status 2.
"""


class CalibrationError(Exception):
    """Base class for every error raised by this package."""


class DataIOError(CalibrationError):
    """A file could not be read or written."""


class DataFormatError(CalibrationError):
    """Malformed input: ragged rows, non-numeric cells, bad model JSON."""


class ValidationError(CalibrationError, ValueError):
    """Input values violate a documented precondition."""


class DegenerateLabelsError(ValidationError):
    """A binary fit was asked for on single-class outcomes, where the
    likelihood has no attained optimum."""


class NumericalError(CalibrationError):
    """A numerical routine failed: non-finite objective, dead line search."""


class NonConvergenceError(NumericalError):
    """The iteration cap was reached before the gradient tolerance."""


class BoundaryOptimumError(NumericalError):
    """A scalar search ended on the boundary of its interval, so the
    reported argmin is a clamp rather than a stationary point."""


class ZeroMassError(NumericalError):
    """Every per-class calibrator returned zero, leaving nothing to
    normalize."""


class OverfitWarning(UserWarning):
    """A scaling map has too many parameters for the fitting set."""
