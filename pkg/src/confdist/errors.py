"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError/RuntimeError so that
callers (and the CLI exit-code mapping) can distinguish usage mistakes, bad
data, numerical breakdowns, and fit non-convergence.
"""


class ConfdistError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ConfdistError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class DataError(ConfdistError, ValueError):
    """Input data violates its contract (shape, finiteness, sign, parsing)."""


class SingularDesignError(DataError):
    """Design matrix is rank deficient at the stated tolerance."""


class DegenerateFitError(DataError):
    """A perfect fit leaves no residual variation to support inference."""


class BracketingError(ConfdistError, ArithmeticError):
    """No sign change found after the bounded bracket-expansion schedule."""


class NoEndpointError(BracketingError):
    """Interval-endpoint inversion failed to bracket the requested level."""


class AccuracyError(ConfdistError, ArithmeticError):
    """Quadrature refinement did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class ConvergenceError(ConfdistError, RuntimeError):
    """Iterative fitting failed to converge within the iteration budget."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


class UnsupportedOperationError(ConfdistError, TypeError):
    """The requested operation is not defined for this object."""


class ContractViolationError(ConfdistError, RuntimeError):
    """A declared numerical property (e.g. pivot monotonicity) failed a check."""


class ScenarioError(ConfdistError, ValueError):
    """A simulation scenario is invalid or produced too many fit failures."""
