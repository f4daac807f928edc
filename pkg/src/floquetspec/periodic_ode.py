"""Companion system of the eigenvalue equation and its matriciant.

An order-n operator ``A = sum_j a_j(t) D^j`` with ``D = i d/dt``, ``a_n = 1``
and T-periodic ``a_j``.  The equation ``A u = lam u`` is written as
``x' = A(t, lam) x`` in derivative coordinates ``x = (u, u', ..., u^(n-1))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernel
from .expr import Expr, evaluate, evaluate_array, free_vars, parse, unparse

__all__ = [
    "OperatorSpec", "Matriciant", "SpecError", "IntegrationError", "StepUnderflow", "BlowUp",
    "companion_matrix", "monodromy", "matriciant_samples", "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-10
BLOWUP_NORM = 1e12
PERIODICITY_SAMPLES = 64


class SpecError(ValueError):
    """Invalid operator or perturbation description."""


class IntegrationError(ArithmeticError):
    pass


class StepUnderflow(IntegrationError):
    pass


class BlowUp(StepUnderflow):
    pass


@dataclass(frozen=True)
class OperatorSpec:
    """Periodic differential operator of order ``n`` with coefficients ``a_0 .. a_n``."""

    n: int
    period: float
    coefficients: tuple[Expr, ...]

    def __post_init__(self):
        if self.n < 1:
            raise SpecError("order must be a positive integer")
        if not self.period > 0:
            raise SpecError("period must be positive")
        if len(self.coefficients) != self.n + 1:
            raise SpecError(f"expected {self.n + 1} coefficients a_0..a_n, got {len(self.coefficients)}")
        for j, a in enumerate(self.coefficients):
            extra = free_vars(a) - {"t"}
            if extra:
                raise SpecError(f"coefficient a_{j} uses variables {sorted(extra)}; only t is allowed")
        self._validate_samples()

    def _validate_samples(self):
        T = self.period
        ts = np.linspace(0.0, 3.0 * T, PERIODICITY_SAMPLES, endpoint=False) + 0.1234 * T
        lead = evaluate_array(self.coefficients[-1], ts)
        if np.max(np.abs(lead - 1.0)) > 1e-12:
            raise SpecError("leading coefficient a_n must be identically 1")
        for j, a in enumerate(self.coefficients[:-1]):
            v0 = evaluate_array(a, ts)
            v1 = evaluate_array(a, ts + T)
            if np.any(np.abs(v1 - v0) > 1e-10 * (1.0 + np.abs(v0))):
                raise SpecError(f"coefficient a_{j} is not {T}-periodic")

    @classmethod
    def from_strings(cls, coefficients: Sequence[str], period: float = 1.0) -> "OperatorSpec":
        exprs = tuple(parse(c) for c in coefficients)
        return cls(n=len(exprs) - 1, period=float(period), coefficients=exprs)

    @classmethod
    def hill(cls, potential: str = "0", period: float = 1.0) -> "OperatorSpec":
        """D^2 + p(t), i.e. -u'' + p u."""
        return cls.from_strings([potential, "0", "1"], period)

    @classmethod
    def from_dict(cls, data: dict) -> "OperatorSpec":
        spec = cls.from_strings(data["coefficients"], data.get("period", 1.0))
        if "order" in data and int(data["order"]) != spec.n:
            raise SpecError(f"order {data['order']} does not match {len(data['coefficients'])} coefficients")
        return spec

    def to_dict(self) -> dict:
        return {"order": self.n, "period": self.period,
                "coefficients": [unparse(a) for a in self.coefficients]}

    @cached_property
    def compiled(self) -> kernel.CompiledCoefficients:
        return kernel.CompiledCoefficients.from_exprs(self.coefficients[:-1])

    def coefficient_values(self, t: float) -> np.ndarray:
        return np.array([evaluate(a, t) for a in self.coefficients[:-1]])


def companion_matrix(spec: OperatorSpec, t: float, lam: complex,
                     coordinates: str = "derivative") -> np.ndarray:
    """Companion matrix A(t, lam) of ``sum_j a_j (i d/dt)^j u = lam u``.

    ``coordinates="derivative"`` uses ``x = (u, u', ...)``: ones on the
    superdiagonal, last row ``(lam - a_0) / i^n`` then ``-a_j i^j / i^n``.
    ``coordinates="dpower"`` uses ``x = (u, Du, ..., D^(n-1) u)``; the two are
    similar through ``diag(1, i, ..., i^(n-1))``.
    """
    n = spec.n
    a = spec.coefficient_values(t)
    lam = complex(lam)
    M = np.zeros((n, n), dtype=complex)
    M[np.arange(n - 1), np.arange(1, n)] = 1.0
    if coordinates == "derivative":
        phase = spec.compiled.phase
        M[-1, 0] += (lam - a[0]) * phase[0]
        M[-1, 1:] += -a[1:] * phase[1:]
        return M
    if coordinates == "dpower":
        # d/dt D^j u = -i D^(j+1) u and D^n u = lam u - sum_{j<n} a_j D^j u
        M[-1, 0] += lam - a[0]
        M[-1, 1:] += -a[1:]
        return -1j * M
    raise ValueError(f"unknown coordinates {coordinates!r}")


@dataclass
class Matriciant:
    """Samples of U(t) with U(0) = I; ``monodromy`` is U(T) when T was sampled."""

    lam: complex
    period: float
    ts: np.ndarray
    samples: np.ndarray
    trace_integral: complex
    steps: int
    rejected: int
    error_estimate: float
    backend: str = field(default=kernel.BACKEND)

    @property
    def monodromy(self) -> np.ndarray:
        idx = np.flatnonzero(np.isclose(self.ts, self.period, rtol=0, atol=1e-14 * self.period))
        if idx.size == 0:
            raise ValueError("U(T) was not sampled")
        return self.samples[idx[-1]]

    @property
    def liouville_defect(self) -> float:
        """|det U(t_last) - exp(int_0^t_last tr A)|."""
        return abs(np.linalg.det(self.samples[-1]) - np.exp(self.trace_integral))


def _run(spec: OperatorSpec, lam: complex, ts: np.ndarray, tol: float, backend: str | None) -> Matriciant:
    if not tol > 0:
        raise ValueError("tol must be positive")
    Us, trace_int, steps, rejected, err, status, t_stop = kernel.integrate(
        spec.compiled, spec.period, lam, ts, tol, backend=backend, blowup=BLOWUP_NORM
    )
    if status != 0:
        name = kernel.STATUS_NAMES[status]
        msg = f"matriciant integration failed ({name}) at t = {t_stop:.6g} for lambda = {complex(lam)}"
        if name == "blow-up":
            raise BlowUp(msg)
        if name == "domain-error":
            # re-evaluate on the Python side for a precise message
            for a in spec.coefficients[:-1]:
                evaluate(a, t_stop)
            raise IntegrationError(msg)
        raise StepUnderflow(msg)
    return Matriciant(
        lam=complex(lam), period=spec.period, ts=ts, samples=Us, trace_integral=trace_int,
        steps=int(steps), rejected=int(rejected), error_estimate=float(err),
        backend=backend or kernel.BACKEND,
    )


def monodromy(spec: OperatorSpec, lam: complex, tol: float = DEFAULT_TOL,
              backend: str | None = None) -> Matriciant:
    """Integrate dU/dt = A(t, lam) U over one period from U(0) = I."""
    return _run(spec, lam, np.array([spec.period]), tol, backend)


def matriciant_samples(spec: OperatorSpec, lam: complex, ts, tol: float = DEFAULT_TOL,
                       backend: str | None = None) -> Matriciant:
    """U(t) at each requested t (sorted, inside [0, T]); steps land exactly on every sample."""
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1:
        raise ValueError("ts must be one-dimensional")
    if np.any(np.diff(ts) < 0):
        raise ValueError("ts must be sorted")
    if ts.size and (ts[0] < 0 or ts[-1] > spec.period * (1 + 1e-12)):
        raise ValueError("sample times must lie in [0, T]")
    return _run(spec, lam, ts, tol, backend)


def trace_integral_quadrature(spec: OperatorSpec, lam: complex, points: int = 2049) -> complex:
    """Independent Simpson quadrature of int_0^T tr A(t, lam) dt."""
    n = spec.n
    ts = np.linspace(0.0, spec.period, points)
    if n == 1:
        vals = (complex(lam) - evaluate_array(spec.coefficients[0], ts)) * spec.compiled.phase[0]
    else:
        vals = -evaluate_array(spec.coefficients[n - 1], ts) * spec.compiled.phase[n - 1]
    h = ts[1] - ts[0]
    w = np.ones(points)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    return complex(h / 3.0 * np.sum(w * vals))

