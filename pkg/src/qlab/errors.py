"""Exception hierarchy shared by every qlab module."""

from __future__ import annotations


class QlabError(Exception):
    """Base class for all qlab errors."""


class DimensionMismatchError(QlabError, ValueError):
    pass


class EvaluationError(QlabError, ArithmeticError):
    """A callable returned a non-finite value where a finite one was required."""


class IntegrationDivergedError(EvaluationError):
    def __init__(self, message: str, last_good_t: float):
        super().__init__(message)
        self.last_good_t = last_good_t


class DomainError(QlabError, ValueError):
    """An argument lies outside the domain on which an operation is defined."""


class OutOfChartError(DomainError):
    pass


class UnsupportedSymbolError(QlabError, TypeError):
    pass


class CompositionError(QlabError, ValueError):
    """Two groupoid arrows are not composable."""

    def __init__(self, message: str, mismatch: float):
        super().__init__(message)
        self.mismatch = mismatch


class ConfigError(QlabError, ValueError):
    """Raised by config validation; ``diagnostics`` holds one string per problem."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("\n".join(diagnostics))
        self.diagnostics = list(diagnostics)
