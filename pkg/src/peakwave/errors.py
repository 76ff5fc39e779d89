"""Exception and warning types shared across the package."""


class PeakwaveError(Exception):
    """Base class for all package errors."""


class DomainError(PeakwaveError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ConvergenceError(PeakwaveError, RuntimeError):
    """An iterative method did not reach its tolerance within its budget."""


class NoRootError(ConvergenceError):
    """A bracketing root search found no sign change."""


class DegenerateCoefficientError(PeakwaveError, ValueError):
    """A variable coefficient vanishes where the discretization needs it positive."""


class CrossingError(PeakwaveError, RuntimeError):
    """Characteristic positions lost strict monotonicity (wave breaking)."""


class TailTruncationWarning(UserWarning):
    """A function sampled on a truncated line grid is not small at the ends."""


class IllConditionedWarning(UserWarning):
    """A dense linear solve has a condition number above the configured cap."""
