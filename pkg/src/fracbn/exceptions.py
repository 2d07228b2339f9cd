"""Exception hierarchy.

Precondition failures (bad parameters, violated hypotheses, containment
problems) derive from ``PreconditionError``; numerical failures (solver
non-convergence, unstable quadrature) derive from ``NumericalError``. The CLI
maps the first family to exit code 2 and the second to exit code 1.
"""


class FracBNError(Exception):
    """Base class for all package errors."""


class PreconditionError(FracBNError, ValueError):
    """An input or hypothesis required by an operation does not hold."""


class HypothesisViolation(PreconditionError):
    """A structural hypothesis on the coefficient field or domain fails."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ContainmentError(PreconditionError):
    """A ball or test-function support escapes the domain."""


class NumericalError(FracBNError, RuntimeError):
    """A numerical procedure failed to reach its target accuracy."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(NumericalError):
    """An iterative solver stopped before meeting its tolerance."""


class QuadratureError(NumericalError):
    """A quadrature rule did not converge."""
