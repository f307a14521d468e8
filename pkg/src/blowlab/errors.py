"""Exception types shared across the package."""


class BlowlabError(Exception):
    """Base class for all package errors."""


class DomainError(BlowlabError, ValueError):
    """An argument lies outside the domain of the operation."""


class LookupFailure(BlowlabError, KeyError):
    """Unknown catalog entry."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown entry"


class SaturationError(BlowlabError, OverflowError):
    """A value would exceed the overflow guard."""

    def __init__(self, message, guard):
        super().__init__(message)
        self.guard = guard


class AccuracyError(BlowlabError, ArithmeticError):
    """A quadrature or root solve failed to reach its tolerance."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class ResolutionError(BlowlabError, ValueError):
    """Requested similarity time lies outside the resolved window."""

    def __init__(self, message, s_max):
        super().__init__(message)
        self.s_max = s_max


class EstimationError(BlowlabError, ValueError):
    """Not enough data to estimate a quantity."""


class ContractError(BlowlabError, ValueError):
    """An input object is missing fields required by the operation."""


class NumericalError(BlowlabError, ArithmeticError):
    """A linear solve or time step produced non-finite values."""


class ConfigError(BlowlabError, ValueError):
    """Invalid run configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        msg = self.args[0]
        return f"line {self.line}: {msg}" if self.line else msg
