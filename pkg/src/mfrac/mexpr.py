r"""Forcing-expression grammar and the exponential-polynomial M-basis.

Two kinds of objects live here.

*Forcing expressions* (:class:`MExpr`) are small expression trees over the
variable ``t`` parsed from text such as ``"2*t^(2*a)+t^a-3"``, where the token
``a`` stands for the fractional order and is substituted at parse time.  They
are only ever evaluated pointwise.

*Basis terms* (:class:`MTerm`, :class:`MPolyExp`) are sums of
``c * u**l * exp(r*u)`` in the scaled variable

.. math:: u(t) = \frac{\Gamma(\beta+1)}{\alpha} t^\alpha ,

on which the M-derivative acts exactly as ``d/du``.  Homogeneous solutions are
built from these, and their M-derivatives are computed symbolically.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import DomainError, EvalOverflowError, ParseError
from .numerics import gamma

__all__ = [
    "MExpr",
    "Const",
    "Var",
    "Pow",
    "Func",
    "Sum",
    "Product",
    "parse_expr",
    "eval_expr",
    "MTerm",
    "MPolyExp",
    "u_of_t",
    "eval_mterm",
    "m_derivative",
    "real_form",
]

_OVERFLOW = 1e300
MAX_POWER = 15
MAX_DEPTH = 32
MAX_SOURCE = 4096


def _check_finite(value: float) -> float:
    if not abs(value) <= _OVERFLOW:
        raise EvalOverflowError(f"expression value {value!r} exceeds 1e300 in magnitude")
    return value


# -- forcing expressions --------------------------------------------------------


class MExpr:
    """Base class of forcing-expression nodes."""

    def evaluate(self, t: float) -> float:
        raise NotImplementedError

    def depth(self) -> int:
        raise NotImplementedError

    # printing is done by __str__, which emits text the parser accepts


def _fmt_number(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class Const(MExpr):
    value: float

    def evaluate(self, t: float) -> float:
        return self.value

    def depth(self) -> int:
        return 1

    def __str__(self) -> str:
        return _fmt_number(self.value)


@dataclass(frozen=True)
class Var(MExpr):
    def evaluate(self, t: float) -> float:
        return t

    def depth(self) -> int:
        return 1

    def __str__(self) -> str:
        return "t"


@dataclass(frozen=True)
class Pow(MExpr):
    base: MExpr
    exponent: float

    def evaluate(self, t: float) -> float:
        base = self.base.evaluate(t)
        if base < 0 and not float(self.exponent).is_integer():
            raise DomainError(f"negative base {base!r} to fractional power {self.exponent!r}")
        try:
            return base**self.exponent
        except OverflowError as exc:
            raise EvalOverflowError(str(exc)) from None

    def depth(self) -> int:
        return 1 + self.base.depth()

    def __str__(self) -> str:
        base = str(self.base)
        bare = isinstance(self.base, (Var, Func)) or (
            isinstance(self.base, Const) and self.base.value >= 0
        )
        return f"{base if bare else f'({base})'}^{_fmt_number(self.exponent)}"


_FUNCS = {"exp": math.exp, "sin": math.sin, "cos": math.cos}


@dataclass(frozen=True)
class Func(MExpr):
    name: str
    arg: MExpr

    def evaluate(self, t: float) -> float:
        try:
            return _FUNCS[self.name](self.arg.evaluate(t))
        except OverflowError as exc:
            raise EvalOverflowError(f"{self.name} overflow: {exc}") from None

    def depth(self) -> int:
        return 1 + self.arg.depth()

    def __str__(self) -> str:
        return f"{self.name}({self.arg})"


@dataclass(frozen=True)
class Sum(MExpr):
    """Signed sum; ``terms`` holds ``(sign, expr)`` with sign +1 or -1."""

    terms: tuple[tuple[int, MExpr], ...]

    def evaluate(self, t: float) -> float:
        return math.fsum(s * e.evaluate(t) for s, e in self.terms)

    def depth(self) -> int:
        return 1 + max(e.depth() for _, e in self.terms)

    def __str__(self) -> str:
        parts = []
        for i, (s, e) in enumerate(self.terms):
            text = f"({e})" if isinstance(e, Sum) else str(e)
            if i == 0:
                parts.append(text if s > 0 else f"-1*({e})")
            else:
                parts.append(("+ " if s > 0 else "- ") + text)
        return " ".join(parts)


@dataclass(frozen=True)
class Product(MExpr):
    factors: tuple[MExpr, ...]

    def evaluate(self, t: float) -> float:
        acc = 1.0
        for f in self.factors:
            acc *= f.evaluate(t)
        return acc

    def depth(self) -> int:
        return 1 + max(f.depth() for f in self.factors)

    def __str__(self) -> str:
        return "*".join(f"({f})" if isinstance(f, (Sum, Product)) else str(f) for f in self.factors)


def eval_expr(e: MExpr, t: float) -> float:
    """Evaluate a forcing expression at ``t > 0``."""
    if not t > 0:
        raise DomainError(f"forcing expressions are evaluated at t > 0, got {t!r}")
    return _check_finite(e.evaluate(float(t)))


_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


class _Parser:
    def __init__(self, text: str, alpha: float) -> None:
        self.text = text
        self.alpha = alpha
        self.pos = 0
        self.nesting = 0

    # token helpers

    def _skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _error(self, message: str, expected: Iterable[str]):
        offset = len(self.text[: self.pos].encode("utf-8"))
        return ParseError(message, offset, frozenset(expected))

    def _expect(self, ch: str) -> None:
        if self._peek() != ch:
            found = self._peek() or "end of input"
            raise self._error(f"unexpected {found!r}", {ch})
        self.pos += 1

    def _number(self) -> float | None:
        self._skip()
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            return None
        self.pos = m.end()
        return float(m.group())

    def _enter(self) -> None:
        self.nesting += 1
        if self.nesting > MAX_DEPTH:
            raise self._error("expression nested too deeply", {"shallower expression"})

    # grammar

    def parse(self) -> MExpr:
        e = self.expr()
        if self._peek():
            raise self._error(f"unexpected {self._peek()!r}", {"+", "-", "*", "^", "end of input"})
        if e.depth() > MAX_DEPTH:
            raise self._error("expression tree too deep", {"shallower expression"})
        return e

    def expr(self) -> MExpr:
        terms = [(1, self.term())]
        while self._peek() in ("+", "-"):
            sign = 1 if self.text[self.pos] == "+" else -1
            self.pos += 1
            terms.append((sign, self.term()))
        return terms[0][1] if len(terms) == 1 and terms[0][0] == 1 else Sum(tuple(terms))

    def term(self) -> MExpr:
        factors = [self.factor()]
        while self._peek() == "*":
            self.pos += 1
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def factor(self) -> MExpr:
        base = self.primary()
        if self._peek() == "^":
            self.pos += 1
            start = self.pos
            gamma_ = self.exponent()
            if not gamma_ > 0:
                self.pos = start
                raise self._error(f"exponent must be positive, got {gamma_!r}", {"positive exponent"})
            return Pow(base, gamma_)
        return base

    def exponent(self) -> float:
        ch = self._peek()
        if ch == "a":
            self.pos += 1
            return self.alpha
        if ch == "(":
            self.pos += 1
            k = self._number()
            if k is None:
                raise self._error("expected a number", {"NUMBER"})
            self._expect("*")
            if self._peek() != "a":
                raise self._error(f"unexpected {self._peek() or 'end of input'!r}", {"a"})
            self.pos += 1
            self._expect(")")
            return k * self.alpha
        k = self._number()
        if k is None:
            raise self._error(
                f"unexpected {ch or 'end of input'!r}", {"NUMBER", "a", "("}
            )
        return k

    def primary(self) -> MExpr:
        ch = self._peek()
        if not ch:
            raise self._error("unexpected end of input", {"NUMBER", "t", "(", "exp", "sin", "cos"})
        if ch == "(":
            self.pos += 1
            self._enter()
            e = self.expr()
            self._expect(")")
            self.nesting -= 1
            return e
        for name in _FUNCS:
            if self.text.startswith(name, self.pos):
                self.pos += len(name)
                self._expect("(")
                self._enter()
                arg = self.expr()
                self._expect(")")
                self.nesting -= 1
                return Func(name, arg)
        if ch == "t":
            self.pos += 1
            return Var()
        value = self._number()
        if value is not None:
            return Const(value)
        raise self._error(f"unexpected {ch!r}", {"NUMBER", "t", "(", "exp", "sin", "cos"})


def parse_expr(text: str, alpha: float) -> MExpr:
    """Parse a forcing expression, substituting ``alpha`` for the token ``a``.

    Grammar::

        expr     := term (("+" | "-") term)*
        term     := factor ("*" factor)*
        factor   := primary ("^" exponent)?
        primary  := NUMBER | "t" | "(" expr ")" | FUNC "(" expr ")"
        FUNC     := "exp" | "sin" | "cos"
        exponent := NUMBER | "a" | "(" NUMBER "*" "a" ")"

    Raises :class:`~mfrac.errors.ParseError` with the byte offset and the
    set of acceptable tokens.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression", 0, frozenset({"NUMBER", "t", "(", "exp", "sin", "cos"}))
    if len(text) > MAX_SOURCE:
        raise ParseError(f"expression longer than {MAX_SOURCE} characters", MAX_SOURCE, frozenset({"end of input"}))
    return _Parser(text, float(alpha)).parse()


# -- M-basis terms --------------------------------------------------------------


def u_of_t(t: float, alpha: float, beta: float) -> float:
    r"""Scaled variable :math:`u = \Gamma(\beta+1) t^\alpha / \alpha`."""
    return gamma(beta + 1.0) / alpha * t**alpha


@dataclass(frozen=True)
class MTerm:
    """``coeff * u**power * exp(rate * u)``."""

    coeff: complex
    power: int
    rate: complex

    def __post_init__(self) -> None:
        if not 0 <= self.power <= MAX_POWER:
            raise DomainError(f"term power must be in [0, {MAX_POWER}], got {self.power}")

    def at_u(self, u: float) -> complex:
        try:
            val = self.coeff * (u**self.power) * cmath.exp(self.rate * u)
        except OverflowError:
            raise EvalOverflowError(f"exp({self.rate}*{u}) overflows") from None
        if not abs(val) <= _OVERFLOW:
            raise EvalOverflowError(f"term value {val!r} exceeds 1e300 in magnitude")
        return val

    def key(self) -> tuple[int, int, int]:
        return (self.power, round(self.rate.real * 1e12), round(self.rate.imag * 1e12))

    def __mul__(self, other: MTerm) -> MTerm:
        return MTerm(self.coeff * other.coeff, self.power + other.power, self.rate + other.rate)


def eval_mterm(term: MTerm, alpha: float, beta: float, t: float) -> complex:
    """Evaluate a basis term at ``t > 0``."""
    if not (0 < alpha <= 1 and beta > 0 and t > 0):
        raise DomainError("eval_mterm needs 0 < alpha <= 1, beta > 0 and t > 0")
    return term.at_u(u_of_t(t, alpha, beta))


Scalar = Union[int, float, complex]


class MPolyExp:
    """Canonical sum of :class:`MTerm` objects.

    Terms sharing ``(power, rate)`` (rates compared after rounding both
    components to 1e-12) are merged; exact-zero coefficients are dropped.
    Term order is deterministic: by rate (real, imag) then power.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[MTerm] = ()) -> None:
        merged: dict[tuple[int, int, int], MTerm] = {}
        for term in terms:
            k = term.key()
            if k in merged:
                prev = merged[k]
                merged[k] = MTerm(prev.coeff + term.coeff, prev.power, prev.rate)
            else:
                merged[k] = MTerm(complex(term.coeff), term.power, complex(term.rate))
        kept = [t for t in merged.values() if t.coeff != 0]
        kept.sort(key=lambda t: (t.rate.real, t.rate.imag, t.power))
        self.terms: tuple[MTerm, ...] = tuple(kept)

    @classmethod
    def single(cls, coeff: complex = 1.0, power: int = 0, rate: complex = 0.0) -> MPolyExp:
        return cls([MTerm(coeff, power, rate)])

    def at_u(self, u: float) -> complex:
        total = sum((term.at_u(u) for term in self.terms), 0j)
        if not abs(total) <= _OVERFLOW:
            raise EvalOverflowError("sum exceeds 1e300 in magnitude")
        return total

    def __call__(self, t: float, alpha: float, beta: float) -> complex:
        return self.at_u(u_of_t(t, alpha, beta))

    def __add__(self, other: MPolyExp) -> MPolyExp:
        return MPolyExp(self.terms + other.terms)

    def __sub__(self, other: MPolyExp) -> MPolyExp:
        return self + (-1.0) * other

    def __rmul__(self, scalar: Scalar) -> MPolyExp:
        return MPolyExp(MTerm(scalar * t.coeff, t.power, t.rate) for t in self.terms)

    def __mul__(self, other):
        if isinstance(other, MPolyExp):
            return MPolyExp(a * b for a in self.terms for b in other.terms)
        return other * self

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MPolyExp) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"MPolyExp({list(self.terms)!r})"

    def is_close(self, other: MPolyExp, tol: float = 1e-12) -> bool:
        """Coefficientwise comparison after merging."""
        diff = self - other
        return all(abs(t.coeff) <= tol for t in diff.terms)


def m_derivative(expr: MPolyExp) -> MPolyExp:
    """Exact M-derivative: ``D(u^l e^{ru}) = (l u^{l-1} + r u^l) e^{ru}``."""
    out = []
    for term in expr.terms:
        if term.power:
            out.append(MTerm(term.coeff * term.power, term.power - 1, term.rate))
        if term.rate != 0:
            out.append(MTerm(term.coeff * term.rate, term.power, term.rate))
    return MPolyExp(out)


def real_form(first: MTerm, second: MTerm) -> tuple[MPolyExp, MPolyExp]:
    """Real basis for the span of a conjugate pair ``u^l e^{(a±ib)u}``.

    Returns ``(u^l e^{au} cos(bu), u^l e^{au} sin(bu))`` with ``b > 0``, both
    expressed as complex-coefficient sums whose values are real.  Input
    coefficients are ignored; only powers and rates matter.
    """
    r1, r2 = complex(first.rate), complex(second.rate)
    if first.power != second.power:
        raise DomainError("conjugate pair must share the same power")
    if r1.imag == 0 or abs(r1 - r2.conjugate()) > 1e-12 * max(1.0, abs(r1)):
        raise DomainError(f"rates {r1} and {r2} are not a conjugate pair")
    a, b = r1.real, abs(r1.imag)
    up, down = complex(a, b), complex(a, -b)
    l = first.power
    cos_part = MPolyExp([MTerm(0.5, l, up), MTerm(0.5, l, down)])
    sin_part = MPolyExp([MTerm(-0.5j, l, up), MTerm(0.5j, l, down)])
    return cos_part, sin_part
