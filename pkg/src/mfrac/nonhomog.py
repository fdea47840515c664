r"""Particular solutions by fractional variation of parameters.

With a fundamental set ``y_1..y_n`` the particular solution is
``v(t) = sum c_i(t) y_i(t)``.  At each ``t`` the M-derivatives ``g_i = D c_i``
solve the Wronskian system with right-hand side ``(0, ..., 0, f(t))``; the
coefficients are recovered with the M-integral

.. math:: c_i(t) = \Gamma(\beta+1) \int_a^t g_i(x)\, x^{\alpha-1}\, dx .
"""

from __future__ import annotations

import bisect

import numpy as np

from .errors import DomainError, ValidationError
from .homogeneous import (
    FundamentalSet,
    ProblemSpec,
    SolutionBundle,
    equilibrated_solve,
    fundamental_set,
    problem_roots,
    render_general,
    solve_ivp,
    wronskian_matrix,
)
from .mexpr import Const, MExpr, eval_expr
from .numerics import QuadConfig, adaptive_quad, gamma

__all__ = [
    "VoPState",
    "ParticularSolution",
    "vop_system_solve",
    "accumulate_coefficients",
    "particular_solution",
    "full_solution",
    "default_lower_limit",
]

CHECKPOINT_SPACING = 0.25
# exponent magnitude above which segments are integrated in s = t^alpha
SUBSTITUTION_THRESHOLD = 30.0


def vop_system_solve(basis: FundamentalSet, t: float, f_val: float) -> np.ndarray:
    """``g = D c`` at ``t``: solves ``W(t) g = (0, ..., 0, f_val)``."""
    rhs = np.zeros(basis.n)
    rhs[-1] = f_val
    if f_val == 0:
        return rhs
    return equilibrated_solve(wronskian_matrix(basis, t), rhs)


class VoPState:
    """Checkpointed accumulation of the variation-of-parameters coefficients.

    Checkpoints sit on the grid ``a + k * spacing`` so the value returned for a
    given ``t`` does not depend on the order of earlier queries.  Only the
    cache is mutable; one writer at a time.
    """

    def __init__(
        self,
        basis: FundamentalSet,
        forcing: MExpr,
        a: float,
        quad: QuadConfig | None = None,
        spacing: float = CHECKPOINT_SPACING,
    ) -> None:
        if not a > 0:
            raise DomainError("the M-integral lower limit must be positive")
        self.basis = basis
        self.forcing = forcing
        self.a = float(a)
        self.quad = quad or QuadConfig()
        self.spacing = spacing
        self.checkpoints: list[tuple[float, np.ndarray]] = [(self.a, np.zeros(basis.n))]
        self.error_bound = 0.0
        self._gb = gamma(basis.beta + 1.0)
        self._max_rate = max((abs(r.real) for r in basis.rates()), default=0.0)

    def g(self, t: float) -> np.ndarray:
        return vop_system_solve(self.basis, t, eval_expr(self.forcing, t))

    def _segment(self, x0: float, x1: float) -> tuple[np.ndarray, float]:
        alpha, gb = self.basis.alpha, self._gb
        if alpha < 1 and self._max_rate * self.basis.u(x1) > SUBSTITUTION_THRESHOLD:
            inv = 1.0 / alpha
            val, err = adaptive_quad(lambda s: self.g(s**inv), x0**alpha, x1**alpha, self.quad)
            scale = gb / alpha
        else:
            val, err = adaptive_quad(lambda x: self.g(x) * x ** (alpha - 1.0), x0, x1, self.quad)
            scale = gb
        return scale * np.asarray(val), float(scale * np.max(err))

    def coefficients(self, t: float) -> np.ndarray:
        """``c(t)``, extending the checkpoint grid as far as ``t`` requires."""
        if t < self.a:
            raise DomainError(f"coefficients are defined for t >= a = {self.a}, got {t}")
        while self.checkpoints[-1][0] + self.spacing <= t:
            x0, c0 = self.checkpoints[-1]
            x1 = self.a + len(self.checkpoints) * self.spacing
            val, err = self._segment(x0, x1)
            self.checkpoints.append((x1, c0 + val))
            self.error_bound += err
        idx = bisect.bisect_right([cp[0] for cp in self.checkpoints], t) - 1
        x0, c0 = self.checkpoints[idx]
        if t == x0:
            return c0.copy()
        val, _ = self._segment(x0, t)
        return c0 + val


def accumulate_coefficients(state: VoPState, t: float) -> np.ndarray:
    return state.coefficients(t)


def default_lower_limit(spec: ProblemSpec) -> float:
    if spec.lower_limit is not None:
        return spec.lower_limit
    if spec.initial is not None:
        return spec.initial.t0
    return 0.5


class ParticularSolution:
    """Evaluator for ``v(t) = sum c_i(t) y_i(t)`` on ``[a, t_max]``."""

    def __init__(self, state: VoPState, t_max: float) -> None:
        self.state = state
        self.domain = (state.a, float(t_max))

    @property
    def error_bound(self) -> float:
        return self.state.error_bound

    def _check(self, t: float) -> None:
        lo, hi = self.domain
        if not lo <= t <= hi:
            raise DomainError(f"t={t} outside the particular-solution domain [{lo}, {hi}]")

    def coefficients(self, t: float) -> np.ndarray:
        self._check(t)
        return self.state.coefficients(t)

    def g(self, t: float) -> np.ndarray:
        return self.state.g(t)

    def forcing_value(self, t: float) -> float:
        return eval_expr(self.state.forcing, t)

    def derivatives(self, t: float) -> np.ndarray:
        """``[v, D v, ..., D^{n-1} v]``; lower-order ``D c_i`` terms cancel by construction."""
        return wronskian_matrix(self.state.basis, t) @ self.coefficients(t)

    def __call__(self, t: float) -> float:
        return float(self.derivatives(t)[0])


def particular_solution(
    spec: ProblemSpec,
    *,
    fundamental: FundamentalSet | None = None,
    t_max: float | None = None,
) -> ParticularSolution:
    """Variation-of-parameters particular solution of ``spec``.

    The M-integral starts at ``spec.lower_limit``, else ``t0``, else 0.5.  A
    missing forcing gives the zero solution.
    """
    fs = fundamental or fundamental_set(problem_roots(spec), spec.alpha, spec.beta)
    forcing = spec.forcing if spec.forcing is not None else Const(0.0)
    a = default_lower_limit(spec)
    state = VoPState(fs, forcing, a, spec.quad)
    return ParticularSolution(state, t_max if t_max is not None else a + 10.0)


def full_solution(spec: ProblemSpec, *, t_max: float | None = None) -> SolutionBundle:
    """Homogeneous constants plus particular solution meeting the initial data."""
    if spec.initial is None:
        raise ValidationError("full_solution needs initial data")
    roots = problem_roots(spec)
    fs = fundamental_set(roots, spec.alpha, spec.beta)
    text = render_general(roots)
    t0 = spec.initial.t0
    if spec.forcing is None:
        return SolutionBundle(spec, roots, fs, solve_ivp(fs, t0, spec.initial.values), None, text)
    vp = particular_solution(spec, fundamental=fs, t_max=t_max if t_max is not None else t0 + 10.0)
    target = np.asarray(spec.initial.values) - vp.derivatives(t0)
    if not np.any(target):
        constants = np.zeros(fs.n)
    else:
        constants = equilibrated_solve(wronskian_matrix(fs, t0), target)
    return SolutionBundle(spec, roots, fs, constants, vp, f"{text} + y_p(t)")
