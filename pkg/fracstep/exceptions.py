"""
Exception hierarchy for fracstep.

Library code raises these; only the command line front end turns them into
exit codes.
"""

from typing import Any, Dict, Optional


class FracstepError(Exception):
    """Base class for all fracstep errors."""


class ArgumentError(FracstepError, ValueError):
    """An argument lies outside the domain of an operation."""


class WeightValidationError(FracstepError, ValueError):
    """The weighting function violates lambda > 0 or lambda' <= 0."""


class ProblemValidationError(FracstepError, ValueError):
    """A problem definition violates the standing assumptions."""


class ConfigError(FracstepError, ValueError):
    """A run configuration failed schema validation."""


class NumericalError(FracstepError, ArithmeticError):
    """A numerical procedure broke down (zero pivot, non-finite values)."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, achieved_error: float):
        super().__init__(message)
        self.estimate = estimate
        self.achieved_error = achieved_error


class StudyError(FracstepError):
    """A refinement study could not complete every level."""

    def __init__(self, message: str, partial_report: Optional[Any] = None,
                 level: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.partial_report = partial_report
        self.level = level
