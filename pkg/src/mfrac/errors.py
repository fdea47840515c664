"""Exception and warning types raised across the package."""

from __future__ import annotations


class MFracError(Exception):
    """Base class for all errors raised by :mod:`mfrac`."""


class DomainError(MFracError, ValueError):
    """An argument lies outside the domain of a function."""


class ValidationError(MFracError, ValueError):
    """A problem description violates one of its constraints."""


class SingularMatrixError(MFracError, ArithmeticError):
    """A linear system has a (numerically) vanishing pivot."""


class RootFindingError(MFracError, ArithmeticError):
    """Polynomial root iteration did not reach the residual bound."""


class QuadratureError(MFracError, ArithmeticError):
    """Adaptive quadrature hit its depth limit.

    The best available estimate and its error bound are kept on the exception
    so callers can decide whether the partial result is usable.
    """

    def __init__(self, message: str, estimate, error: float) -> None:
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class EvalOverflowError(MFracError, OverflowError):
    """An expression evaluated to a magnitude above 1e300."""


class StepOverflowError(MFracError, OverflowError):
    """A Runge-Kutta state component exceeded the divergence guard."""


class ParseError(MFracError, ValueError):
    """Syntax error in a forcing expression.

    ``offset`` is the byte offset into the UTF-8 encoded source and
    ``expected`` the set of tokens that would have been accepted there.
    """

    def __init__(self, message: str, offset: int, expected: frozenset[str]) -> None:
        exp = ", ".join(sorted(expected))
        super().__init__(f"{message} at offset {offset} (expected one of: {exp})")
        self.offset = offset
        self.expected = expected


class ConvergenceWarning(RuntimeWarning):
    """A series or extrapolation did not settle within its budget."""


class SchemaError(ValidationError):
    """A problem file has a missing, unknown or mistyped field."""

    def __init__(self, field: str, reason: str) -> None:
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
