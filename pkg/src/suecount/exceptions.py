"""Exception types raised by suecount."""


class SueError(Exception):
    """Base class for all suecount errors."""


class DomainError(SueError, ValueError):
    """A parameter lies outside the domain of the requested evaluation."""


class NumericalInstabilityError(SueError, ArithmeticError):
    """A closed-form evaluation lost too much precision to be trusted."""


class ConvergenceError(SueError, ArithmeticError):
    """An iterative evaluation (series, continued fraction) did not converge.

    The offending parameters are kept on ``params`` for diagnostics.
    """

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params or {}


class BoundedEvaluationError(SueError, OverflowError):
    """A linear predictor is too large to exponentiate safely."""


class RankDeficientError(SueError, ValueError):
    """The design matrix does not have full column rank."""

    def __init__(self, message, dependent_columns=()):
        super().__init__(message)
        self.dependent_columns = tuple(dependent_columns)


class DatasetError(SueError, ValueError):
    """A dataset file could not be parsed or failed validation."""


class DatasetUnavailableError(SueError, FileNotFoundError):
    """A named dataset is not bundled and no local copy was supplied."""
