"""Command-line front end: ``mfrac solve | verify | sample``.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import (
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
from .homogeneous import (
    InitialData,
    ProblemSpec,
    SolutionBundle,
    characteristic_poly,
    general_solution,
    render_poly,
    render_roots,
)
from .mexpr import MPolyExp, parse_expr
from .nonhomog import default_lower_limit, full_solution
from .numerics import QuadConfig, gamma
from .verify import (
    md_limit_oracle,
    md_reduction_oracle,
    residual,
    rk4_cross_check,
    rk4_steps,
    transformed_rhs,
)

EXIT_OK, EXIT_VERIFY_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
MAX_FILE_BYTES = 64 * 1024
_KEYS = {"alpha", "beta", "coefficients", "forcing", "initial", "lower_limit", "quad"}
_NUMERIC_ERRORS = (
    SingularMatrixError,
    QuadratureError,
    RootFindingError,
    EvalOverflowError,
    StepOverflowError,
    ArithmeticError,
)


# -- problem files --------------------------------------------------------------


def _number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(field, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise SchemaError(field, "must be finite")
    return float(value)


def _object(value, field: str, allowed: set[str], required: set[str]) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(field, "expected an object")
    unknown = set(value) - allowed
    if unknown:
        raise SchemaError(field, f"unknown keys {sorted(unknown)}")
    missing = required - set(value)
    if missing:
        raise SchemaError(field, f"missing keys {sorted(missing)}")
    return value


def problem_from_dict(data: dict) -> ProblemSpec:
    """Validate a decoded problem object and build its :class:`ProblemSpec`."""
    _object(data, "<root>", _KEYS, {"alpha", "beta", "coefficients"})
    alpha = _number(data["alpha"], "alpha")
    beta = _number(data["beta"], "beta")
    coeffs = data["coefficients"]
    if not isinstance(coeffs, list):
        raise SchemaError("coefficients", "expected a list")
    p = [_number(c, f"coefficients[{i}]") for i, c in enumerate(coeffs)]

    initial = None
    if data.get("initial") is not None:
        ini = _object(data["initial"], "initial", {"t0", "values"}, {"t0", "values"})
        if not isinstance(ini["values"], list):
            raise SchemaError("initial.values", "expected a list")
        initial = InitialData(
            _number(ini["t0"], "initial.t0"),
            tuple(_number(v, f"initial.values[{i}]") for i, v in enumerate(ini["values"])),
        )
    lower = None
    if data.get("lower_limit") is not None:
        lower = _number(data["lower_limit"], "lower_limit")
    quad = QuadConfig()
    if data.get("quad") is not None:
        q = _object(data["quad"], "quad", {"abs_tol", "rel_tol", "max_depth"}, set())
        depth = q.get("max_depth", quad.max_depth)
        if isinstance(depth, bool) or not isinstance(depth, int):
            raise SchemaError("quad.max_depth", "expected an integer")
        try:
            quad = QuadConfig(
                _number(q.get("abs_tol", quad.abs_tol), "quad.abs_tol"),
                _number(q.get("rel_tol", quad.rel_tol), "quad.rel_tol"),
                depth,
            )
        except ValueError as exc:
            raise ValidationError(str(exc)) from None

    forcing = None
    if data.get("forcing") is not None:
        if not isinstance(data["forcing"], str):
            raise SchemaError("forcing", "expected a string")
        if not 0.0 < alpha <= 1.0:
            raise ValidationError("alpha must be in (0,1]")
        forcing = parse_expr(data["forcing"], alpha)
    return ProblemSpec(alpha, beta, p, forcing, initial, lower, quad)


def load_problem(path) -> ProblemSpec:
    """Read and validate a JSON problem file (at most 64 KiB)."""
    raw = Path(path).read_bytes()
    if len(raw) > MAX_FILE_BYTES:
        raise ValidationError(f"problem file larger than {MAX_FILE_BYTES} bytes")
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError("<file>", f"not valid JSON: {exc}") from None
    return problem_from_dict(data)


# -- sampling -------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def sample_rows(bundle: SolutionBundle, t_from: float, t_to: float, samples: int) -> list[list[float]]:
    ts = [t_from] if samples == 1 else list(np.linspace(t_from, t_to, samples))
    rows = []
    for t in ts:
        derivs = bundle.derivatives(t)
        res, _ = bundle.residual(t)
        rows.append([float(t), *map(float, derivs), res])
    return rows


def csv_header(n: int) -> list[str]:
    return ["t", "y", *(f"dy_{k}" for k in range(1, n)), "residual"]


def write_csv(rows: list[list[float]], n: int, stream) -> None:
    writer = csv.writer(stream, lineterminator="\r\n")
    writer.writerow(csv_header(n))
    for row in rows:
        writer.writerow([_fmt(x) for x in row])


def read_csv(path, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(t, X)`` from a sample CSV; ``X`` holds ``y`` and its ``n-1`` M-derivatives."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != csv_header(n):
        raise SchemaError("solution", f"header must be {','.join(csv_header(n))}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise SchemaError("solution", str(exc)) from None
    if data.ndim != 2 or len(data) < 2:
        raise SchemaError("solution", "need at least two sample rows")
    return data[:, 0], data[:, 1 : 1 + n]


# -- reporting ------------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    tol: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol)


def _equation_text(spec: ProblemSpec) -> str:
    n = spec.n
    parts = [f"D^{n} y" if n > 1 else "D y"]
    for k in range(n - 1, -1, -1):
        c = spec.p[k]
        if c == 0:
            continue
        var = "y" if k == 0 else ("D y" if k == 1 else f"D^{k} y")
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        parts.append(f"{sign} {var}" if mag == 1 else f"{sign} {mag:.12g}*{var}")
    rhs = str(spec.forcing) if spec.forcing is not None else "0"
    return " ".join(parts) + f" = {rhs}"


def render_report(spec: ProblemSpec, bundle: SolutionBundle) -> str:
    gb = gamma(spec.beta + 1.0)
    lines = [
        f"equation: {_equation_text(spec)}",
        f"alpha = {spec.alpha:.12g}, beta = {spec.beta:.12g}",
        f"characteristic polynomial: {render_poly(characteristic_poly(spec))}",
        "roots:",
        *(f"  {line}" for line in render_roots(bundle.roots)),
        "general solution:",
        f"  y(t) = {bundle.text}",
        f"  where u = Gamma(beta+1)/alpha * t^alpha = {gb / spec.alpha:.12g}*t^{spec.alpha:.12g}",
    ]
    if spec.forcing is not None:
        a = default_lower_limit(spec)
        lines += [
            "  y_p(t) = sum_i c_i(t)*y_i(t), D c_i from the Wronskian system,",
            f"           c_i(t) = Gamma(beta+1) * integral_a^t D c_i(x) x^(alpha-1) dx, a = {a:.12g}",
        ]
    if spec.initial is not None and bundle.constants is not None:
        vals = ", ".join(f"{v:.12g}" for v in spec.initial.values)
        lines.append(f"initial data: t0 = {spec.initial.t0:.12g}, values = [{vals}]")
        lines.append("constants:")
        lines += [f"  c{i + 1} = {c:.12g}" for i, c in enumerate(bundle.constants)]
    return "\n".join(lines)


def render_checks(checks: list[Check]) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'check'.ljust(width)}  {'max rel. error':>14}  {'tol':>9}  result"]
    for c in checks:
        lines.append(
            f"{c.name.ljust(width)}  {c.value:>14.3e}  {c.tol:>9.1e}  {'pass' if c.passed else 'FAIL'}"
        )
        if not c.passed and c.detail:
            lines.append(f"  worst: {c.detail}")
    return "\n".join(lines)


# -- verification ---------------------------------------------------------------


def _probes(spec: ProblemSpec, count: int) -> list[float]:
    if spec.initial is not None:
        lo = spec.initial.t0
        return list(np.linspace(lo, lo + 4.0, count))
    return list(np.linspace(0.5, 5.0, count))


def _homogeneous(spec: ProblemSpec) -> ProblemSpec:
    return ProblemSpec(spec.alpha, spec.beta, spec.p, quad=spec.quad)


def solution_checks(spec: ProblemSpec, bundle: SolutionBundle, probes: list[float], tol: float) -> list[Check]:
    checks = []
    hom = _homogeneous(spec)
    worst = None
    for j, b in enumerate(bundle.fundamental.basis):
        rep = residual(hom, b, probes, tol=tol)
        if worst is None or rep.max_relative > worst[0]:
            worst = (rep.max_relative, j, rep.worst_probe())
    checks.append(Check(
        "basis residual (symbolic)", worst[0], tol,
        f"basis {worst[1] + 1} at t={worst[2][0]:.6g}, residual={worst[2][1]:.3e}",
    ))

    vp = bundle.particular
    if vp is not None:
        ptest = [t for t in probes if t > vp.domain[0]] or [vp.domain[0] + 0.5]
        rep = residual(spec, vp, ptest, tol=tol)
        t, r, _ = rep.worst_probe()
        checks.append(Check("particular residual (nested differences)", rep.max_relative, tol,
                            f"t={t:.6g}, residual={r:.3e}"))
        worst_cond = 0.0
        for t in ptest:
            g = vp.g(t)
            W = bundle.fundamental.matrix(t)
            rhs = np.zeros(spec.n)
            rhs[-1] = vp.forcing_value(t)
            lhs = W @ g
            scale = np.abs(W) @ np.abs(g) + abs(rhs[-1]) + 1e-300
            worst_cond = max(worst_cond, float(np.max(np.abs(lhs - rhs) / scale)))
        checks.append(Check("variation-of-parameters conditions", worst_cond, tol))

    if bundle.constants is not None:
        rows = [(t, *bundle.residual(t)) for t in probes]
        rel = max(abs(r) / s for _, r, s in rows)
        t, r, _ = max(rows, key=lambda x: abs(x[1]) / x[2])
        checks.append(Check("solution residual", rel, tol, f"t={t:.6g}, residual={r:.3e}"))

        t0 = spec.initial.t0
        traj = rk4_cross_check(spec, t0 + 2.0, 20000)
        t_end, x_end = traj[-1]
        closed = bundle.derivatives(t_end)
        err = float(np.max(np.abs(closed - x_end)) / (1.0 + np.max(np.abs(closed))))
        checks.append(Check("RK4 cross-check at t0+2 (20000 steps)", err, tol,
                            f"closed={closed[0]:.12g}, rk4={x_end[0]:.12g}"))
        target = bundle
    else:
        basis0 = bundle.fundamental.basis[0]
        fs = bundle.fundamental
        target = lambda t: basis0.at_u(fs.u(t)).real  # noqa: E731

    worst_o = 0.0
    detail = ""
    lo = vp.domain[0] if vp is not None else 0.0
    for t in probes[:: max(1, len(probes) // 5)]:
        if t - 1e-3 * (1 + t) <= lo:
            continue
        a = md_limit_oracle(target, t, spec.alpha, spec.beta)
        b = md_reduction_oracle(target, t, spec.alpha, spec.beta)
        rel = abs(a - b) / (1.0 + abs(b))
        if rel >= worst_o:
            worst_o, detail = rel, f"t={t:.6g}, limit={a:.12g}, reduction={b:.12g}"
    checks.append(Check("limit vs reduction oracle", worst_o, tol, detail))
    return checks


def pinned_checks(spec: ProblemSpec, path, tol: float) -> list[Check]:
    """Checks of a sampled trajectory against the problem's first-order system."""
    ts, X = read_csv(path, spec.n)
    if np.any(ts <= 0) or np.any(np.diff(ts) <= 0):
        raise SchemaError("solution", "t column must be positive and strictly increasing")
    rhs = transformed_rhs(spec)
    worst, detail = 0.0, ""
    for k in range(len(ts) - 1):
        dt = ts[k + 1] - ts[k]
        sub = max(4, math.ceil(dt / 1e-3))
        pred = rk4_steps(rhs, ts[k], X[k].copy(), ts[k + 1], sub)
        scale = max(np.max(np.abs(X[k + 1])), np.max(np.abs(X[k])), 1e-300)
        rel = float(np.max(np.abs(pred - X[k + 1])) / scale)
        if rel > worst:
            worst, detail = rel, f"t={ts[k + 1]:.6g}, pinned y={X[k + 1][0]:.12g}, propagated y={pred[0]:.12g}"
    checks = [Check("pinned trajectory defect", worst, tol, detail)]
    if spec.initial is not None and abs(ts[0] - spec.initial.t0) <= 1e-12 * max(1.0, ts[0]):
        y0 = np.asarray(spec.initial.values)
        err = float(np.max(np.abs(X[0] - y0)) / (1.0 + np.max(np.abs(y0))))
        checks.append(Check("pinned initial data", err, tol))
    return checks


# -- commands -------------------------------------------------------------------


def _bundle_for_range(spec: ProblemSpec, t_to: float) -> SolutionBundle:
    if spec.forcing is not None and spec.initial is not None:
        return full_solution(spec, t_max=max(t_to, spec.initial.t0 + 10.0))
    return general_solution(spec)


def _range(spec: ProblemSpec, args) -> tuple[float, float, int]:
    if spec.initial is None:
        raise ValidationError("no initial data: the solution is not unique, cannot sample")
    t0 = spec.initial.t0
    t_from = t0 if args.t_from is None else args.t_from
    t_to = t0 + 2.0 if args.t_to is None else args.t_to
    if not (t_from > 0 and t_to >= t_from):
        raise ValidationError("need 0 < --from <= --to")
    if spec.forcing is not None and t_from < default_lower_limit(spec):
        raise ValidationError("--from must not precede the M-integral lower limit")
    if args.samples < 1:
        raise ValidationError("--samples must be at least 1")
    return t_from, t_to, args.samples


def _emit_csv(rows, n: int, out) -> None:
    if out is None or out == "-":
        buf = io.StringIO()
        write_csv(rows, n, buf)
        sys.stdout.write(buf.getvalue())
    else:
        with open(out, "w", newline="") as fh:
            write_csv(rows, n, fh)


def cmd_solve(args) -> int:
    spec = load_problem(args.file)
    wants_csv = args.out is not None
    if wants_csv:
        t_from, t_to, samples = _range(spec, args)
        bundle = _bundle_for_range(spec, t_to)
    else:
        bundle = _bundle_for_range(spec, 0.0)
    print(render_report(spec, bundle))
    if wants_csv:
        _emit_csv(sample_rows(bundle, t_from, t_to, samples), spec.n, args.out)
        print(f"wrote {samples} samples to {args.out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    spec = load_problem(args.file)
    t_from, t_to, samples = _range(spec, args)
    bundle = _bundle_for_range(spec, t_to)
    _emit_csv(sample_rows(bundle, t_from, t_to, samples), spec.n, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = load_problem(args.file)
    if args.probes < 2:
        raise ValidationError("--probes must be at least 2")
    if args.solution is not None:
        checks = pinned_checks(spec, args.solution, args.tol)
    else:
        probes = _probes(spec, args.probes)
        bundle = _bundle_for_range(spec, probes[-1])
        checks = solution_checks(spec, bundle, probes, args.tol)
    print(render_checks(checks))
    ok = all(c.passed for c in checks)
    print("verification passed" if ok else "verification FAILED")
    return EXIT_OK if ok else EXIT_VERIFY_FAIL


EPILOG = """exit codes:
  0  success
  1  verification failed (worst probe reported)
  2  input error (schema, parse or validation)
  3  numeric failure (singular system, quadrature, overflow)
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfrac",
        description="Solve and verify sequential linear M-fractional differential equations.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def sampling(p):
        p.add_argument("--from", dest="t_from", type=float, default=None, help="first sample time (default t0)")
        p.add_argument("--to", dest="t_to", type=float, default=None, help="last sample time (default t0+2)")
        p.add_argument("--samples", type=int, default=201, help="number of equally spaced samples")
        p.add_argument("--out", default=None, help="CSV output path ('-' for stdout)")

    p = sub.add_parser("solve", help="print the general solution; optionally write samples",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("file")
    sampling(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run residual, RK4 and oracle checks",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("file")
    p.add_argument("--probes", type=int, default=20, help="number of probe points")
    p.add_argument("--tol", type=float, default=1e-6, help="pass threshold (relative)")
    p.add_argument("--solution", default=None, help="check a pinned solution CSV instead of re-solving")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sample", help="write y and its M-derivatives as CSV",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("file")
    sampling(p)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _NUMERIC_ERRORS as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MFracError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
