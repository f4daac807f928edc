"""Command-line front end.

    floquetspec monodromy --op configs/free_hill.json --lambda 0,0
    floquetspec bands --op configs/cos_hill.json --min -1 --max 40 --res 512
    floquetspec certify --op configs/cos_hill.json --pert configs/decay3.json --lambda 1.0,0

Exit status: 0 on success, 1 for invalid input, 2 for numerical failure.
Errors are reported as a JSON object on standard error.  Negative numbers
must be attached with ``=`` (``--lambda=-1,0``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .expr import ExprError, evaluate_array, parse
from .floquet import classify_multiplicators, halfline_invertibility, wholeline_spectrum_membership
from .hill import band_structure, classify_hill_point
from .linalg import LinalgError
from .periodic_ode import IntegrationError, OperatorSpec, SpecError, monodromy
from .perturbation import PerturbationSpec, certify_absence
from .resolvent import (PreconditionViolated, QuadratureTooCoarse, RhsFunction, apply_resolvent, bump,
                        weighted_R_bound_check)

DEFAULT_SEED = 20240917
SIG_DIGITS = 12


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------- formatting


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}") + 0.0


def _cplx(z):
    z = complex(z)
    return {"re": _num(z.real), "im": _num(z.imag)}


def load_schema(name: str) -> dict:
    text = resources.files(__package__).joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _emit(payload, args, schema: str | None = None):
    if schema is not None:
        jsonschema.validate(payload, load_schema(schema))
    text = json.dumps(payload, indent=2) + "\n"
    _write(text, args)


def _write(text: str, args):
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_csv(header, rows, args):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.{SIG_DIGITS}g}" if isinstance(v, float) else v for v in r])
    _write(buf.getvalue(), args)


# ---------------------------------------------------------------- inputs


def _load_json(path: str, schema: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    try:
        jsonschema.validate(data, load_schema(schema))
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"{path}: {exc.message}") from exc
    return data


def _load_op(path: str) -> OperatorSpec:
    try:
        return OperatorSpec.from_dict(_load_json(path, "operator"))
    except ExprError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def _load_pert(path: str) -> PerturbationSpec:
    try:
        return PerturbationSpec.from_dict(_load_json(path, "perturbation"))
    except ExprError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def parse_complex(text: str) -> complex:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected 're' or 're,im', got {text!r}")


def _floats(n: int | None = None):
    def conv(text: str):
        try:
            vals = [float(x) for x in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
        if n is not None and len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
        return vals
    return conv


def _p_norm(text: str) -> float:
    if text in ("inf", "infinity"):
        return math.inf
    if text in ("1", "2"):
        return float(text)
    raise argparse.ArgumentTypeError("p must be 1, 2 or inf")


# ---------------------------------------------------------------- commands


def cmd_monodromy(args):
    op = _load_op(args.op)
    mat = monodromy(op, args.lam, args.tol)
    ms = classify_multiplicators(mat.monodromy, args.eps)
    payload = {
        "command": "monodromy", "version": __version__, "lambda": _cplx(args.lam), "backend": mat.backend,
        "monodromy": [[_cplx(z) for z in row] for row in mat.monodromy],
        "multiplicators": [{
            "rho": _cplx(m.rho), "modulus": _num(abs(m.rho)), "algebraic_mult": m.algebraic_mult,
            "geometric_mult": m.geometric_mult, "block_orders": list(m.block_orders), "location": m.location.value,
        } for m in ms.entries],
        "l": ms.l,
        "halfline_invertibility": halfline_invertibility(ms).value,
        "wholeline_spectrum": wholeline_spectrum_membership(ms),
        "liouville_defect": _num(mat.liouville_defect),
        "steps": mat.steps,
    }
    _emit(payload, args, "monodromy")


def cmd_bands(args):
    op = _load_op(args.op)
    bs = band_structure(op, args.min, args.max, args.res, args.tol, args.threads)
    if args.format == "csv":
        _emit_csv(["lambda", "discriminant"], zip(map(float, bs.grid), map(float, bs.values)), args)
        return
    payload = {
        "command": "bands", "version": __version__, "lambda_min": _num(args.min), "lambda_max": _num(args.max),
        "resolution": args.res,
        "bands": [[_num(a), _num(b)] for a, b in bs.bands],
        "gaps": [[_num(a), _num(b)] for a, b in bs.gaps],
        "edges": [{"lambda": _num(e.lam), "discriminant": e.discriminant_value, "jordan_order": e.jordan_order,
                   "touching": e.touching} for e in bs.edges],
        "warnings": bs.warnings,
    }
    _emit(payload, args, "bands")


def cmd_classify(args):
    op = _load_op(args.op)
    if args.lam.imag != 0.0:
        raise ValidationError("classify needs a real lambda")
    hp = classify_hill_point(op, args.lam.real, args.tol)
    payload = {
        "command": "classify", "version": __version__, "lambda": _num(args.lam.real), "kind": hp.kind.value,
        "l": hp.l, "discriminant": _num(hp.discriminant), "distance": _num(hp.distance),
        "required_delta": None if hp.required_delta is None else _num(hp.required_delta),
    }
    _emit(payload, args, "classify")


def cmd_resolve(args):
    op = _load_op(args.op)
    if args.rhs is not None:
        e = parse(args.rhs)
        func = lambda t: evaluate_array(e, t)  # noqa: E731
        support = args.support
        if support is None:
            raise ValidationError("--rhs needs --support")
    else:
        a, b = args.bump
        func, support = bump(a, b), b
    nu = RhsFunction.from_callable(func, args.L, args.h, support)
    sol = apply_resolvent(op, args.lam, nu, args.tol, check=False)
    bound = max(1e-4, 100.0 * args.tol * float(np.max(np.abs(nu.values), initial=0.0)))
    if args.format == "csv":
        rows = ((float(t), float(u.real), float(u.imag), "" if not np.isfinite(r) else float(r))
                for t, u, r in zip(sol.ts, sol.u, sol.residual))
        _emit_csv(["t", "re_u", "im_u", "residual"], rows, args)
    else:
        payload = {
            "command": "resolve", "version": __version__, "lambda": _cplx(args.lam), "L": _num(args.L),
            "h": _num(args.h), "support": _num(support), "points": len(sol.ts),
            "residual_max": _num(sol.residual_max), "residual_bound": _num(bound),
            "u_sup": _num(np.max(np.abs(sol.u))), "u_at_zero": _cplx(sol.u[0]),
        }
        _emit(payload, args, "resolve")
    if sol.residual_max > bound:
        raise QuadratureTooCoarse(f"residual {sol.residual_max:.3e} exceeds {bound:.3e}")


def cmd_certify(args):
    op = _load_op(args.op)
    pert = _load_pert(args.pert)
    c = certify_absence(op, pert, args.lam, args.tol, args.eps)
    payload = {
        "command": "certify", "version": __version__, "lambda": _cplx(c.lam), "domain": c.domain.value,
        "l": c.l, "delta": _num(c.delta),
        "multiplicators": [_cplx(r) for r in c.multiplicators],
        "multiplicator_precondition": c.multiplicator_precondition,
        "delta_checks": [{"j": j, "passed": d.passed, "worst_sample": _num(d.worst_sample),
                          "trend_slope": _num(d.trend_slope)} for j, d in enumerate(c.delta_checks)],
        "subdiagonal_checks": [{"j": j, "passed": s.passed, "worst_violation": _num(s.worst_violation)}
                               for j, s in enumerate(c.subdiagonal_checks)],
        "kernel_checks": [{"j": j, "passed": k.passed, "row_sup": _num(k.row_sup), "col_sup": _num(k.col_sup),
                           "row_slope": _num(k.row_slope), "col_slope": _num(k.col_slope), "heuristic": True}
                          for j, k in enumerate(c.kernel_checks) if k is not None],
        "verdict": c.verdict.value, "reason": c.reason,
    }
    _emit(payload, args, "certify")


def cmd_hunt(args):
    from .discretize import hunt_eigenvalues
    op = _load_op(args.op)
    pert = _load_pert(args.pert) if args.pert else None
    rep = hunt_eigenvalues(op, pert, args.window, args.lengths, args.h, args.loc_tol, args.drift_tol,
                           threads=args.threads)
    payload = {
        "command": "hunt", "version": __version__, "label": rep.label, "lengths": [_num(x) for x in rep.lengths],
        "h": _num(rep.h), "window": [_num(x) for x in rep.window], "loc_tol": _num(rep.loc_tol),
        "drift_tol": _num(rep.drift_tol), "genuine_count": len(rep.genuine),
        "candidates": [{
            "lambda": _cplx(c.lam), "per_length": [None if v is None else _cplx(v) for v in c.per_length],
            "localization": _num(c.localization), "drift": _num(c.drift), "classification": c.classification.value,
        } for c in rep.candidates],
    }
    _emit(payload, args, "hunt")


def cmd_rcheck(args):
    grid = np.linspace(0.0, args.length, args.points)
    rep = weighted_R_bound_check(args.lam, args.tau, grid, args.trials, args.p, args.variant, args.seed)
    payload = {
        "command": "rcheck", "version": __version__, "lambda": _cplx(args.lam), "tau": _num(args.tau),
        "variant": rep.variant, "p": "inf" if math.isinf(args.p) else _num(args.p), "trials": args.trials,
        "seed": args.seed, "bound": _num(rep.bound), "max_ratio": _num(rep.max_ratio),
        "violations": rep.violations, "pass": rep.passed,
    }
    _emit(payload, args, "rcheck")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floquetspec", description="Floquet spectral analysis of periodic operators")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-10, help="integrator tolerance")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for randomized checks")
    common.add_argument("--threads", type=int, default=1, help="worker cap for lambda-grid work")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("monodromy", parents=[common], help="U(T), multiplicators and their classification")
    p.add_argument("--op", required=True)
    p.add_argument("--lambda", dest="lam", type=parse_complex, required=True, metavar="RE,IM")
    p.add_argument("--eps", type=float, default=1e-6, help="unit-circle tolerance")
    p.set_defaults(func=cmd_monodromy)

    p = sub.add_parser("bands", parents=[common], help="Hill discriminant scan and band edges")
    p.add_argument("--op", required=True)
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--res", type=int, default=512)
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("classify", parents=[common], help="band interior, edge or gap, with l")
    p.add_argument("--op", required=True)
    p.add_argument("--lambda", dest="lam", type=parse_complex, required=True, metavar="RE[,0]")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("resolve", parents=[common], help="half-line resolvent applied to a compactly supported nu")
    p.add_argument("--op", required=True)
    p.add_argument("--lambda", dest="lam", type=parse_complex, required=True, metavar="RE,IM")
    p.add_argument("--rhs", help="nu as an expression in t (zeroed beyond --support)")
    p.add_argument("--support", type=float)
    p.add_argument("--bump", type=_floats(2), default=[1.0, 3.0], metavar="A,B", help="smooth bump on (A, B)")
    p.add_argument("--L", type=float, default=20.0)
    p.add_argument("--h", type=float, default=1.0 / 512)
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("certify", parents=[common], help="absence-of-eigenvalue certificate")
    p.add_argument("--op", required=True)
    p.add_argument("--pert", required=True)
    p.add_argument("--lambda", dest="lam", type=parse_complex, required=True, metavar="RE,IM")
    p.add_argument("--eps", type=float, default=1e-6, help="unit-circle tolerance")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("hunt", parents=[common], help="eigenvalue hunt on Dirichlet sections")
    p.add_argument("--op", required=True)
    p.add_argument("--pert")
    p.add_argument("--window", type=_floats(4), default=[0.5, 3.0, -0.5, 0.5], metavar="RE0,RE1,IM0,IM1")
    p.add_argument("--lengths", type=_floats(), default=[20.0, 40.0, 80.0])
    p.add_argument("--h", type=float, default=1.0 / 64)
    p.add_argument("--loc-tol", type=float, default=1e-3)
    p.add_argument("--drift-tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_hunt)

    p = sub.add_parser("rcheck", parents=[common], help="sampled norm bound for weighted R(lambda)")
    p.add_argument("--lambda", dest="lam", type=parse_complex, required=True, metavar="RE,IM")
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--p", type=_p_norm, default=2.0)
    p.add_argument("--variant", choices=("weighted", "shifted", "literal"), default="weighted")
    p.add_argument("--length", type=float, default=60.0)
    p.add_argument("--points", type=int, default=6001)
    p.set_defaults(func=cmd_rcheck)
    return parser


def _fail(exc: BaseException, code: int) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.threads < 1:
        return _fail(ValidationError("--threads must be at least 1"), 1)
    try:
        args.func(args)
    except (PreconditionViolated, QuadratureTooCoarse, IntegrationError, LinalgError, ArithmeticError,
            MemoryError) as exc:
        return _fail(exc, 2)
    except (ValidationError, SpecError, ExprError, ValueError, jsonschema.ValidationError) as exc:
        return _fail(exc, 1)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
