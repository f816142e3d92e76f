"""
Exception hierarchy for the harmonic predictive density toolkit.

Library code raises these; the command layer catches them and turns them
into status dictionaries and exit codes.
"""

from typing import Iterable, Optional


class PredictiveError(Exception):
    """Base class for every error raised by this package."""


class ProblemSpecError(PredictiveError, ValueError):
    """An input violates a documented precondition."""


class QuadratureError(PredictiveError, ArithmeticError):
    """A quadrature layer failed to reach its tolerance."""

    def __init__(
        self,
        message: str,
        layer: str = "quad",
        estimate: Optional[float] = None,
        error: Optional[float] = None,
    ):
        super().__init__(message)
        self.layer = layer
        self.estimate = estimate
        self.error = error


class NumericalFailure(PredictiveError, ArithmeticError):
    """Overflow or non-finite values inside a Monte Carlo loop."""

    def __init__(self, message: str, count: int = 0):
        super().__init__(message)
        self.count = count


class ConfigError(PredictiveError):
    """Invalid run configuration (CLI flags or config file)."""


class VerificationFailure(PredictiveError):
    """One or more required verification checks failed."""

    def __init__(self, failed: Iterable[str]):
        self.failed = list(failed)
        super().__init__(f"failed checks: {', '.join(self.failed)}")
