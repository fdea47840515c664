"""Constant-coefficient homogeneous equations: characteristic roots,
fundamental sets, M-Wronskians and initial value problems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import SingularMatrixError, ValidationError
from .mexpr import MExpr, MPolyExp, MTerm, m_derivative, real_form
from .numerics import QuadConfig, RootSet, cluster_roots, gamma, lu_solve, poly_from_roots, poly_roots

if TYPE_CHECKING:
    from .nonhomog import ParticularSolution

__all__ = [
    "InitialData",
    "ProblemSpec",
    "RootSet",
    "BasisLabel",
    "FundamentalSet",
    "SolutionBundle",
    "characteristic_poly",
    "problem_roots",
    "fundamental_set",
    "wronskian_matrix",
    "abel_wronskian",
    "solve_ivp",
    "general_solution",
    "render_general",
]

MAX_ORDER = 16


@dataclass(frozen=True)
class InitialData:
    """``y(t0), D y(t0), ..., D^{n-1} y(t0)``."""

    t0: float
    values: tuple[float, ...]


@dataclass(frozen=True)
class ProblemSpec:
    """``D^n y + p[n-1] D^{n-1} y + ... + p[0] y = f(t)`` with constant ``p``.

    ``D`` is the M-derivative of order ``alpha`` with Mittag-Leffler parameter
    ``beta``.  ``forcing`` is optional (homogeneous when absent);
    ``lower_limit`` is the lower limit of the M-integral used for the
    particular solution.
    """

    alpha: float
    beta: float
    p: tuple[float, ...]
    forcing: MExpr | None = None
    initial: InitialData | None = None
    lower_limit: float | None = None
    quad: QuadConfig = field(default_factory=QuadConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        if not (0.0 < self.alpha <= 1.0):
            raise ValidationError("alpha must be in (0,1]")
        if not (0.0 < self.beta <= 49.0):
            raise ValidationError("beta must be in (0,49]")
        n = len(self.p)
        if n < 1:
            raise ValidationError("at least one coefficient is required")
        if n > MAX_ORDER:
            raise ValidationError(f"order must be at most {MAX_ORDER}")
        if not all(math.isfinite(x) for x in self.p):
            raise ValidationError("coefficients must be finite")
        if self.initial is not None:
            ini = self.initial
            object.__setattr__(
                self, "initial", InitialData(float(ini.t0), tuple(float(v) for v in ini.values))
            )
            if not ini.t0 > 0:
                raise ValidationError("initial t0 must be positive")
            if len(ini.values) != n:
                raise ValidationError(f"initial values must have length {n}")
            if not all(math.isfinite(v) for v in ini.values):
                raise ValidationError("initial values must be finite")
        if self.lower_limit is not None:
            if not self.lower_limit > 0:
                raise ValidationError("lower_limit must be positive")
            if self.initial is not None and self.lower_limit > self.initial.t0:
                raise ValidationError("lower_limit must not exceed t0")

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def gamma_beta(self) -> float:
        return gamma(self.beta + 1.0)


@dataclass(frozen=True)
class BasisLabel:
    """Provenance of one basis function: root, power of ``u`` and kind."""

    kind: str  # "real", "cos" or "sin"
    root: complex
    power: int


class FundamentalSet:
    """Real fundamental solutions together with their symbolic M-derivatives.

    ``derivs[k][j]`` is the k-th M-derivative of basis function ``j`` for
    ``k = 0..n`` (the n-th is kept for residual checks).
    """

    def __init__(self, basis: Sequence[MPolyExp], labels: Sequence[BasisLabel], alpha: float, beta: float):
        self.basis = tuple(basis)
        self.labels = tuple(labels)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.u_scale = gamma(beta + 1.0) / alpha
        chains = []
        for b in self.basis:
            chain = [b]
            for _ in range(len(self.basis)):
                chain.append(m_derivative(chain[-1]))
            chains.append(chain)
        self.derivs = tuple(tuple(c[k] for c in chains) for k in range(len(self.basis) + 1))

    @property
    def n(self) -> int:
        return len(self.basis)

    def u(self, t: float) -> float:
        return self.u_scale * t**self.alpha

    def matrix(self, t: float, orders: int | None = None) -> np.ndarray:
        """Values of ``D^k y_j`` at ``t`` for ``k < orders`` (default ``n``)."""
        orders = self.n if orders is None else orders
        u = self.u(t)
        return np.array([[d.at_u(u).real for d in self.derivs[k]] for k in range(orders)])

    def rates(self) -> list[complex]:
        return [lab.root for lab in self.labels]


def characteristic_poly(spec: ProblemSpec) -> list[float]:
    """``[p0, p1, ..., p_{n-1}, 1]``."""
    return [*spec.p, 1.0]


def _expand(roots: RootSet) -> list[float]:
    flat: list[complex] = []
    for r, mu in roots.real_roots:
        flat += [complex(r)] * mu
    for a, b, sigma in roots.complex_pairs:
        flat += [complex(a, b), complex(a, -b)] * sigma
    return poly_from_roots(flat)


def _refine_center(coeffs: Sequence[float], z: complex, m: int) -> complex:
    """Newton on the (m-1)-th derivative, where an m-fold root is simple."""
    d = P.polyder(np.asarray(coeffs, dtype=float), m - 1)
    dd = P.polyder(d)
    for _ in range(8):
        step = P.polyval(z, d) / P.polyval(z, dd) if P.polyval(z, dd) != 0 else 0.0
        z = z - step
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            break
    return z


def _refined(coeffs: Sequence[float], roots: RootSet) -> RootSet:
    real = tuple(
        (float(_refine_center(coeffs, complex(r), mu).real) if mu > 1 else r, mu) for r, mu in roots.real_roots
    )
    pairs = []
    for a, b, sigma in roots.complex_pairs:
        z = _refine_center(coeffs, complex(a, b), sigma) if sigma > 1 else complex(a, b)
        pairs.append((z.real, abs(z.imag), sigma))
    return RootSet(real, tuple(pairs))


def problem_roots(spec: ProblemSpec, tol: float = 1e-6) -> RootSet:
    """Clustered characteristic roots.

    Eigenvalue roots of a root of multiplicity ``m`` scatter by about
    ``eps^{1/m}``, so a triple root can escape the ``tol`` clustering.  Coarser
    clusterings are then tried, with each merged center refined by Newton on
    the derivative where it is simple, and kept only when re-expanding them
    reproduces the coefficients to 1e-9 (a backward-error test).  Genuinely
    distinct roots therefore never merge.
    """
    coeffs = characteristic_poly(spec)
    raw = poly_roots(coeffs)
    best = cluster_roots(raw, tol)
    bound = 1e-9 * max(1.0, max(abs(c) for c in coeffs))
    for coarse in (1e-5, 1e-4, 1e-3):
        if coarse <= tol:
            continue
        cand = cluster_roots(raw, coarse)
        if len(cand.real_roots) + len(cand.complex_pairs) >= len(best.real_roots) + len(best.complex_pairs):
            continue
        cand = _refined(coeffs, cand)
        if max(abs(x - y) for x, y in zip(_expand(cand), coeffs)) <= bound:
            best = cand
    return best


def fundamental_set(roots: RootSet, alpha: float, beta: float) -> FundamentalSet:
    """Basis ``u^l e^{ru}`` for real roots, then ``u^l e^{au} cos/sin(bu)`` for pairs.

    Real roots come first in ascending order, then the complex pairs; within a
    root ``l`` ascends, and for a pair the cosine precedes the sine at each ``l``.
    """
    basis: list[MPolyExp] = []
    labels: list[BasisLabel] = []
    for r, mu in roots.real_roots:
        for l in range(mu):
            basis.append(MPolyExp.single(1.0, l, r))
            labels.append(BasisLabel("real", complex(r), l))
    for a, b, sigma in roots.complex_pairs:
        for l in range(sigma):
            cos_part, sin_part = real_form(MTerm(1.0, l, complex(a, b)), MTerm(1.0, l, complex(a, -b)))
            basis += [cos_part, sin_part]
            labels += [BasisLabel("cos", complex(a, b), l), BasisLabel("sin", complex(a, b), l)]
    return FundamentalSet(basis, labels, alpha, beta)


def wronskian_matrix(fs: FundamentalSet, t: float) -> np.ndarray:
    """Matrix of successive M-derivatives; row ``i`` holds ``D^i y_j(t)``."""
    return fs.matrix(t)


def abel_wronskian(W0: float, t0: float, t: float, p_top: float, alpha: float, beta: float) -> float:
    """Wronskian transported from ``t0`` to ``t`` for constant ``p_{n-1}``."""
    return W0 * math.exp(-p_top * gamma(beta + 1.0) * (t**alpha - t0**alpha) / alpha)


def equilibrated_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """LU solve after scaling rows and columns to unit max-norm.

    Wronskian entries span many orders of magnitude (``e^{ru}`` for different
    ``r``); equilibration keeps the singularity test scale-free.
    """
    A = np.asarray(A, dtype=float)
    row = np.max(np.abs(A), axis=1)
    col = np.max(np.abs(A), axis=0)
    if np.any(row == 0) or np.any(col == 0):
        raise SingularMatrixError("matrix has a zero row or column")
    scaled = A / row[:, None] / col[None, :]
    z = lu_solve(scaled, np.asarray(b, dtype=float) / row).x
    return z / col


def solve_ivp(fs: FundamentalSet, t0: float, y_init: Sequence[float]) -> np.ndarray:
    """Constants ``c`` with ``W(t0) c = y_init``."""
    if not t0 > 0:
        raise ValidationError("t0 must be positive")
    y = np.asarray(y_init, dtype=float)
    if y.shape != (fs.n,):
        raise ValidationError(f"expected {fs.n} initial values")
    if not np.any(y):
        return np.zeros(fs.n)
    try:
        return equilibrated_solve(wronskian_matrix(fs, t0), y)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"singular Wronskian at t0={t0}: {exc}") from None


# -- rendering ------------------------------------------------------------------


def _num(x: float) -> str:
    s = f"{x:.12g}"
    return "0" if s == "-0" else s


def _scaled_u(k: float) -> str:
    text = _num(k)
    if text in ("1", "-1"):
        return text[:-1] + "u"
    return f"{text}u"


def _poly_in_u(names: list[str]) -> str:
    parts = [names[0]] + [f"{c}*u" if l == 1 else f"{c}*u^{l}" for l, c in enumerate(names) if l]
    return parts[0] if len(parts) == 1 else "(" + " + ".join(parts) + ")"


def render_general(roots: RootSet) -> str:
    """Symbolic general solution in the variable ``u``, constants ``c1..cn``."""
    pieces = []
    k = 1
    for r, mu in roots.real_roots:
        names = [f"c{k + l}" for l in range(mu)]
        k += mu
        poly = _poly_in_u(names)
        r = 0.0 if abs(r) < 5e-13 else r
        pieces.append(poly if r == 0 else f"{poly}*exp({_scaled_u(r)})")
    for a, b, sigma in roots.complex_pairs:
        cos_names = [f"c{k + 2 * l}" for l in range(sigma)]
        sin_names = [f"c{k + 2 * l + 1}" for l in range(sigma)]
        k += 2 * sigma
        osc = f"{_poly_in_u(cos_names)}*cos({_scaled_u(b)}) + {_poly_in_u(sin_names)}*sin({_scaled_u(b)})"
        a = 0.0 if abs(a) < 5e-13 else a
        pieces.append(f"({osc})" if a == 0 else f"exp({_scaled_u(a)})*({osc})")
    return " + ".join(pieces)


def render_poly(coeffs: Sequence[float]) -> str:
    n = len(coeffs) - 1
    parts = [f"r^{n}" if n > 1 else "r"]
    for k in range(n - 1, -1, -1):
        c = coeffs[k]
        if c == 0:
            continue
        mag = abs(c)
        sign = "-" if c < 0 else "+"
        if k == 0:
            body = _num(mag)
        else:
            var = "r" if k == 1 else f"r^{k}"
            body = var if mag == 1 else f"{_num(mag)}*{var}"
        parts.append(f"{sign} {body}")
    return " ".join(parts)


def render_roots(roots: RootSet) -> list[str]:
    lines = [f"{_num(r)} (multiplicity {mu})" for r, mu in roots.real_roots]
    lines += [f"{_num(a)} ± {_num(b)}i (multiplicity {s})" for a, b, s in roots.complex_pairs]
    return lines


# -- bundles --------------------------------------------------------------------


@dataclass
class SolutionBundle:
    """Everything known about the solution of one problem."""

    spec: ProblemSpec
    roots: RootSet
    fundamental: FundamentalSet
    constants: np.ndarray | None = None
    particular: "ParticularSolution | None" = None
    text: str = ""

    def _require_unique(self) -> np.ndarray:
        if self.constants is None:
            raise ValidationError("no initial data: the solution is not unique")
        return self.constants

    def derivatives(self, t: float) -> np.ndarray:
        """``[y, D y, ..., D^{n-1} y]`` at ``t``."""
        c = self._require_unique()
        out = wronskian_matrix(self.fundamental, t) @ c
        if self.particular is not None:
            out = out + self.particular.derivatives(t)
        return out

    def __call__(self, t: float) -> float:
        return float(self.derivatives(t)[0])

    def residual(self, t: float) -> tuple[float, float]:
        """``(L[y](t) - f(t), scale)`` from symbolic basis derivatives.

        For the particular part the top derivative uses the variation of
        parameters identity ``D^n v = sum c_i D^n y_i + sum (D c_i) D^{n-1} y_i``.
        """
        c = self._require_unique()
        spec, fs = self.spec, self.fundamental
        full = fs.matrix(t, fs.n + 1)
        coeffs = c.copy()
        top_extra = 0.0
        f_val = 0.0
        if self.particular is not None:
            coeffs = coeffs + self.particular.coefficients(t)
            g = self.particular.g(t)
            top_extra = float(g @ full[fs.n - 1])
            f_val = self.particular.forcing_value(t)
        values = full @ coeffs
        values[fs.n] += top_extra
        terms = [values[fs.n]] + [spec.p[k] * values[k] for k in range(fs.n)] + [-f_val]
        res = math.fsum(terms)
        return res, 1.0 + max(abs(x) for x in terms)


def general_solution(spec: ProblemSpec) -> SolutionBundle:
    """Fundamental set, rendering and, where the data allow, constants and a
    particular solution."""
    roots = problem_roots(spec)
    fs = fundamental_set(roots, spec.alpha, spec.beta)
    text = render_general(roots)
    if spec.forcing is not None:
        from .nonhomog import full_solution, particular_solution

        if spec.initial is not None:
            return full_solution(spec)
        vp = particular_solution(spec, fundamental=fs)
        return SolutionBundle(spec, roots, fs, None, vp, f"{text} + y_p(t)")
    constants = None
    if spec.initial is not None:
        constants = solve_ivp(fs, spec.initial.t0, spec.initial.values)
    return SolutionBundle(spec, roots, fs, constants, None, text)
