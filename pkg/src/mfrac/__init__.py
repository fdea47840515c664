"""Sequential linear M-fractional differential equations with constant coefficients."""

__version__ = "0.1.0"

from .errors import (
    ConvergenceWarning,
    DomainError,
    EvalOverflowError,
    MFracError,
    ParseError,
    QuadratureError,
    RootFindingError,
    SchemaError,
    SingularMatrixError,
    StepOverflowError,
    ValidationError,
)
from .homogeneous import InitialData, ProblemSpec, SolutionBundle, general_solution
from .mexpr import MPolyExp, MTerm, m_derivative, parse_expr
from .nonhomog import full_solution, particular_solution
from .numerics import QuadConfig, gamma, mittag_leffler

__all__ = [
    "ConvergenceWarning",
    "DomainError",
    "EvalOverflowError",
    "InitialData",
    "MFracError",
    "MPolyExp",
    "MTerm",
    "ParseError",
    "ProblemSpec",
    "QuadConfig",
    "QuadratureError",
    "RootFindingError",
    "SchemaError",
    "SingularMatrixError",
    "SolutionBundle",
    "StepOverflowError",
    "ValidationError",
    "full_solution",
    "gamma",
    "general_solution",
    "m_derivative",
    "mittag_leffler",
    "parse_expr",
    "particular_solution",
]
