"""Backend selection for the matriciant integrator.

The compiled kernel is used when importable; set ``FLOQUETSPEC_BACKEND=python``
to force the pure-Python fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _pykernel
from .expr import MAX_PROGRAM_STACK, Expr, compile_program, to_callable

try:
    from . import _ckernel
except ImportError:  # pragma: no cover - depends on the build
    _ckernel = None

AVAILABLE_BACKENDS = ("cython", "python") if _ckernel is not None else ("python",)
BACKEND = "python" if os.environ.get("FLOQUETSPEC_BACKEND") == "python" or _ckernel is None else "cython"

STATUS_NAMES = {
    _pykernel.ST_OK: "ok",
    _pykernel.ST_UNDERFLOW: "step-underflow",
    _pykernel.ST_BLOWUP: "blow-up",
    _pykernel.ST_DOMAIN: "domain-error",
    _pykernel.ST_MAXSTEPS: "max-steps",
}


@dataclass(frozen=True)
class CompiledCoefficients:
    """Coefficients ``a_0 .. a_{n-1}`` of an order-n operator in kernel-ready form."""

    n: int
    codes: np.ndarray
    code_off: np.ndarray
    consts: np.ndarray
    const_off: np.ndarray
    phase: np.ndarray
    funcs: tuple[Callable[[float], float], ...] = field(repr=False)
    compiled_ok: bool = True

    @classmethod
    def from_exprs(cls, coeffs: Sequence[Expr]) -> "CompiledCoefficients":
        n = len(coeffs)
        codes, consts, code_off, const_off = [], [], [0], [0]
        ok = True
        for e in coeffs:
            c, k, depth = compile_program(e)
            ok = ok and depth <= MAX_PROGRAM_STACK
            codes += c
            consts += k
            code_off.append(len(codes))
            const_off.append(len(consts))
        # u^(n) = sum_j row_j u^(j); row_0 = (lam - a_0) i^-n, row_j = -a_j i^(j-n)
        phase = np.array([1j ** (j - n) for j in range(n)], dtype=complex)
        phase = np.round(phase.real) + 1j * np.round(phase.imag)
        return cls(
            n=n,
            codes=np.asarray(codes, dtype=np.int32),
            code_off=np.asarray(code_off, dtype=np.int_),
            consts=np.asarray(consts, dtype=float),
            const_off=np.asarray(const_off, dtype=np.int_),
            phase=phase,
            funcs=tuple(to_callable(e) for e in coeffs),
            compiled_ok=ok,
        )


def integrate(coeffs: CompiledCoefficients, period: float, lam: complex, ts, tol: float,
              backend: str | None = None, max_steps: int = 1_000_000, blowup: float = 1e12):
    """Run the selected backend; returns the raw kernel tuple (see ``_ckernel``)."""
    backend = backend or BACKEND
    ts = np.ascontiguousarray(ts, dtype=float)
    if backend == "cython" and _ckernel is not None and coeffs.compiled_ok:
        return _ckernel.integrate_matriciant(
            coeffs.n, float(period), complex(lam), coeffs.codes, coeffs.code_off,
            coeffs.consts, coeffs.const_off, coeffs.phase, ts, float(tol), max_steps, blowup,
        )
    if backend not in ("cython", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    return _pykernel.integrate_matriciant(
        coeffs.n, float(period), complex(lam), coeffs.funcs, coeffs.phase, ts, float(tol),
        max_steps, blowup,
    )
