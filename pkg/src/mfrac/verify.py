"""Independent checks: numeric M-derivative oracles, equation residuals and a
Runge-Kutta cross-integrator on the equivalent first-order system."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConvergenceWarning, StepOverflowError, ValidationError
from .homogeneous import ProblemSpec
from .mexpr import MPolyExp, eval_expr, m_derivative, u_of_t
from .numerics import gamma, mittag_leffler

__all__ = [
    "ResidualReport",
    "md_reduction_oracle",
    "md_limit_oracle",
    "nested_md",
    "residual",
    "rk4_cross_check",
    "transformed_rhs",
]

_EPS = np.finfo(float).eps
_CBRT_EPS = _EPS ** (1.0 / 3.0)

RealFn = Callable[[float], float]


def md_reduction_oracle(f: RealFn, t: float, alpha: float, beta: float, h: float | None = None) -> float:
    r"""``t^{1-alpha} / Gamma(beta+1) * f'(t)`` with a central difference.

    The default step is ``(1 + |t|) * eps^{1/3}``.  ``beta = 0`` is accepted
    (``Gamma(1) = 1``) for cross-checking the classical formulas.
    """
    if not t > 0:
        raise ValidationError("the M-derivative oracles need t > 0")
    if h is None:
        h = (1.0 + abs(t)) * _CBRT_EPS
    h = min(h, 0.5 * t)
    deriv = (f(t + h) - f(t - h)) / (2.0 * h)
    return t ** (1.0 - alpha) / gamma(beta + 1.0) * deriv


def md_limit_oracle(f: RealFn, t: float, alpha: float, beta: float) -> float:
    r"""Difference quotient of the limit definition, Richardson-extrapolated.

    Evaluates ``(f(t E_beta(eps t^{-alpha})) - f(t)) / eps`` for
    ``eps in {1e-4, 5e-5, 2.5e-5} * t^alpha`` and eliminates the ``O(eps)`` and
    ``O(eps^2)`` error terms.  A :class:`ConvergenceWarning` flags a sequence
    whose corrections grow instead of shrinking.
    """
    if not t > 0:
        raise ValidationError("the M-derivative oracles need t > 0")
    ft = f(t)
    quotients = []
    for scale in (1e-4, 5e-5, 2.5e-5):
        eps = scale * t**alpha
        quotients.append((f(t * mittag_leffler(beta, eps * t ** (-alpha))) - ft) / eps)
    d1, d2, d3 = quotients
    r12 = 2.0 * d2 - d1
    r23 = 2.0 * d3 - d2
    result = (4.0 * r23 - r12) / 3.0
    first, second = abs(d2 - d1), abs(r23 - r12)
    if second > first and second > 1e-8 * (1.0 + abs(result)):
        warnings.warn(
            f"limit-definition extrapolation diverging at t={t}", ConvergenceWarning, stacklevel=2
        )
    return result


def nested_md(f: RealFn, order: int, alpha: float, beta: float, h: float | None = None) -> list[RealFn]:
    """``[f, D f, ..., D^order f]`` as callables built from nested reduction oracles.

    The step defaults to ``eps^{1/(order+2)}`` (relative to ``1 + |t|``), the
    usual balance between truncation and amplified round-off for nested
    central differences.
    """
    fns: list[RealFn] = [f]
    frac = _EPS ** (1.0 / (order + 2)) if order else _CBRT_EPS
    for _ in range(order):
        inner = fns[-1]

        def d(t: float, inner=inner) -> float:
            step = h if h is not None else (1.0 + abs(t)) * frac
            return md_reduction_oracle(inner, t, alpha, beta, step)

        fns.append(d)
    return fns


@dataclass
class ResidualReport:
    """Per-probe residuals of ``L[y] - f`` with their scales."""

    probes: list[tuple[float, float, float]]
    max_relative: float
    tol: float
    passed: bool

    @classmethod
    def from_probes(cls, probes: list[tuple[float, float, float]], tol: float) -> ResidualReport:
        if not probes:
            raise ValidationError("a residual report needs at least one probe")
        worst = max(abs(r) / s for _, r, s in probes)
        return cls(probes, worst, tol, bool(worst <= tol))

    def worst_probe(self) -> tuple[float, float, float]:
        return max(self.probes, key=lambda p: abs(p[1]) / p[2])


Solution = Union[MPolyExp, RealFn]


def residual(
    spec: ProblemSpec,
    y: Solution,
    probes: Sequence[float],
    *,
    tol: float = 1e-9,
    h: float | None = None,
) -> ResidualReport:
    """Residual ``D^n y + sum p_k D^k y - f`` at each probe.

    An :class:`MPolyExp` is differentiated symbolically; any other callable is
    treated as a black box and differentiated with nested reduction oracles
    (meaningful for ``n <= 3``).  The scale at each probe is
    ``1 + max |term|`` over all terms including ``f``.
    """
    n = spec.n
    if isinstance(y, MPolyExp):
        chain = [y]
        for _ in range(n):
            chain.append(m_derivative(chain[-1]))

        def values(t: float) -> list[float]:
            u = u_of_t(t, spec.alpha, spec.beta)
            return [d.at_u(u).real for d in chain]

    else:
        fns = nested_md(y, n, spec.alpha, spec.beta, h)

        def values(t: float) -> list[float]:
            return [fn(t) for fn in fns]

    rows = []
    for t in probes:
        if not t > 0:
            raise ValidationError("residual probes must be positive")
        vals = values(t)
        f_val = eval_expr(spec.forcing, t) if spec.forcing is not None else 0.0
        terms = [vals[n]] + [spec.p[k] * vals[k] for k in range(n)] + [-f_val]
        rows.append((float(t), math.fsum(terms), 1.0 + max(abs(x) for x in terms)))
    return ResidualReport.from_probes(rows, tol)


def transformed_rhs(spec: ProblemSpec) -> Callable[[float, np.ndarray], np.ndarray]:
    r"""Right side of ``X' = Gamma(beta+1) t^{alpha-1} (A X + F)``.

    ``X = (y, D y, ..., D^{n-1} y)`` and ``A`` is the companion matrix of the
    constant coefficients.
    """
    n = spec.n
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -np.asarray(spec.p)
    gb = gamma(spec.beta + 1.0)
    alpha = spec.alpha
    forcing = spec.forcing

    def rhs(t: float, x: np.ndarray) -> np.ndarray:
        out = A @ x
        if forcing is not None:
            out[-1] += eval_expr(forcing, t)
        return gb * t ** (alpha - 1.0) * out

    return rhs


def rk4_steps(rhs, t: float, x: np.ndarray, t_end: float, steps: int) -> np.ndarray:
    h = (t_end - t) / steps
    for i in range(steps):
        ti = t + i * h
        k1 = rhs(ti, x)
        k2 = rhs(ti + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(ti + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(ti + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def rk4_cross_check(spec: ProblemSpec, t_end: float, steps: int) -> list[tuple[float, np.ndarray]]:
    """Classical fixed-step RK4 on the transformed system from ``t0`` to ``t_end``.

    Returns the whole trajectory ``[(t_k, X_k)]``.  Raises
    :class:`StepOverflowError` if any component exceeds 1e12.
    """
    if spec.initial is None:
        raise ValidationError("the RK4 cross-check needs initial data")
    if steps < 100:
        raise ValidationError("the RK4 cross-check needs at least 100 steps")
    t0 = spec.initial.t0
    if not t_end > t0:
        raise ValidationError("t_end must exceed t0")
    rhs = transformed_rhs(spec)
    h = (t_end - t0) / steps
    x = np.array(spec.initial.values, dtype=float)
    out = [(t0, x.copy())]
    for i in range(steps):
        t = t0 + i * h
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.abs(x) <= 1e12):
            raise StepOverflowError(f"RK4 state exceeded 1e12 at t={t + h:.6g}")
        out.append((t0 + (i + 1) * h, x.copy()))
    return out
