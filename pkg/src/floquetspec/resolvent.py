"""Half-line resolvent of a periodic operator and the Volterra operator R(lam).

The solution of ``(A - lam) u = nu`` that vanishes beyond the support of
``nu`` is the first component of

    x(t) = -int_t^S U(t) U(s)^-1 f(s) ds,   f = (0, ..., 0, nu / i^n),

where U is the matriciant.  Writing U(t) = F(t) exp(t Gamma) turns the
kernel into a finite sum of terms g(t) (t - s)^k exp(lam_a (t - s)) h(s)
with periodic g, h.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from . import linalg
from .expr import evaluate_array
from .fd import GridTooCoarse, derivative_matrix_rows, stencil_width
from .floquet import (Invertibility, classify_multiplicators, floquet_decomposition,
                      halfline_invertibility)
from .periodic_ode import DEFAULT_TOL, OperatorSpec, matriciant_samples

__all__ = [
    "RhsFunction", "ResolventSolution", "KernelTerm", "ResolventKernelDecomposition", "WeightParams",
    "BoundReport", "PreconditionViolated", "QuadratureTooCoarse", "IllConditionedSimilarity",
    "GridTooCoarse", "apply_resolvent", "residual_profile", "residual_norm", "apply_R", "apply_R_power",
    "R_power_direct", "weighted_R_bound_check", "decompose_resolvent_kernel", "bump",
]

SUPPORT_TOL = 1e-14
SIMILARITY_COND_LIMIT = 1e8


class PreconditionViolated(ValueError):
    """lam has a multiplicator inside the unit circle: no half-line inverse."""


class QuadratureTooCoarse(ArithmeticError):
    pass


class IllConditionedSimilarity(UserWarning):
    pass


@dataclass
class RhsFunction:
    """nu sampled on a uniform grid over [0, L], identically zero beyond ``support``."""

    ts: np.ndarray
    values: np.ndarray
    support: float

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.ts.ndim != 1 or self.ts.shape != self.values.shape:
            raise ValueError("ts and values must be 1-d arrays of equal length")
        if len(self.ts) < 3 or self.ts[0] != 0.0:
            raise ValueError("grid must start at 0 and have at least 3 points")
        h = self.ts[1] - self.ts[0]
        if np.max(np.abs(np.diff(self.ts) - h)) > 1e-9 * h:
            raise ValueError("grid must be uniform")
        if not 0.0 <= self.support <= self.ts[-1]:
            raise ValueError("support bound must lie in [0, L]")
        beyond = self.ts > self.support
        if np.any(np.abs(self.values[beyond]) > SUPPORT_TOL):
            raise ValueError("nu is not zero beyond its declared support")

    @property
    def h(self) -> float:
        return float(self.ts[1] - self.ts[0])

    @property
    def L(self) -> float:
        return float(self.ts[-1])

    @classmethod
    def from_callable(cls, func: Callable, L: float, h: float, support: float) -> "RhsFunction":
        npts = int(round(L / h))
        if abs(npts * h - L) > 1e-9 * L:
            raise ValueError("L must be a multiple of h")
        ts = np.linspace(0.0, L, npts + 1)
        vals = np.where(ts <= support, np.asarray(func(ts), dtype=complex), 0.0)
        return cls(ts, vals, support)


def bump(a: float, b: float, height: float = 1.0) -> Callable:
    """Smooth bump exp(1 - 1/(1 - x^2)) rescaled to (a, b); zero outside."""
    def f(t):
        t = np.asarray(t, dtype=float)
        x = (2.0 * t - (a + b)) / (b - a)
        out = np.zeros_like(t)
        inside = np.abs(x) < 1.0
        out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
        return out
    return f


@dataclass
class ResolventSolution:
    lam: complex
    ts: np.ndarray
    x: np.ndarray
    residual: np.ndarray
    residual_max: float

    @property
    def u(self) -> np.ndarray:
        return self.x[:, 0]


def _require_inverse(spec: OperatorSpec, lam: complex, tol: float):
    mat = matriciant_samples(spec, lam, np.array([spec.period]), tol)
    ms = classify_multiplicators(mat.monodromy)
    if halfline_invertibility(ms) is Invertibility.NO_INVERSE:
        inside = [m.rho for m in ms.entries if m.location.value == "Inside"]
        raise PreconditionViolated(f"multiplicator(s) {inside} inside the unit circle at lambda = {lam}")
    return ms


def _steps_per_period(spec: OperatorSpec, h: float) -> int:
    m = int(round(spec.period / h))
    if m < 2 or abs(m * h - spec.period) > 1e-9 * spec.period:
        raise ValueError(f"grid step {h} must divide the period {spec.period}")
    return m


def apply_resolvent(spec: OperatorSpec, lam: complex, nu: RhsFunction, tol: float = DEFAULT_TOL,
                    check: bool = True) -> ResolventSolution:
    """Solve (A - lam) u = nu on the half-line with u = 0 beyond supp nu.

    Composite Simpson over pairs of grid cells, run backwards from L on two
    interleaved chains (even and odd grid indices).  The propagator
    U(t) U(s)^-1 only depends on t mod T and s - t, so one period of
    matriciant samples, continued by U(t + T) = U(t) U(T), covers any L.
    """
    lam = complex(lam)
    _require_inverse(spec, lam, tol)
    n = spec.n
    h = nu.h
    m = _steps_per_period(spec, h)
    N = len(nu.ts) - 1
    if nu.support > nu.ts[max(N - 1, 0)]:
        raise ValueError("support must end at least one grid step before L")

    tau = np.arange(m + 1) * h
    U = matriciant_samples(spec, lam, tau, tol).samples
    UT = U[m]
    Uinv = np.linalg.inv(U)
    UTinv = np.linalg.inv(UT)

    def inv_at(j):
        # U(tau_j)^-1 for j in [0, m + 2)
        if j <= m:
            return Uinv[j]
        return UTinv @ Uinv[j - m]

    # P1[j] = U(tau_j) U(tau_j + h)^-1, P2[j] = U(tau_j) U(tau_j + 2h)^-1
    P1 = np.array([U[j] @ inv_at(j + 1) for j in range(m)])
    P2 = np.array([U[j] @ inv_at(j + 2) for j in range(m)])

    f_last = nu.values * spec.compiled.phase[0]
    x = np.zeros((N + 1, n), dtype=complex)
    for k in range(N - 2, -1, -1):
        j = k % m
        incr = P2[j] @ x[k + 2]
        quad = f_last[k] * np.eye(n)[:, -1] + 4.0 * f_last[k + 1] * P1[j][:, -1] + f_last[k + 2] * P2[j][:, -1]
        x[k] = incr - (h / 3.0) * quad

    res = residual_profile(spec, lam, x[:, 0], nu)
    rmax = float(np.nanmax(res)) if np.any(np.isfinite(res)) else 0.0
    sol = ResolventSolution(lam=lam, ts=nu.ts, x=x, residual=res, residual_max=rmax)
    if check:
        bound = max(1e-4, 100.0 * tol * float(np.max(np.abs(nu.values), initial=0.0)))
        if rmax > bound:
            raise QuadratureTooCoarse(f"residual {rmax:.3e} exceeds {bound:.3e}; refine the grid")
    return sol


def residual_profile(spec: OperatorSpec, lam: complex, u, nu: RhsFunction) -> np.ndarray:
    """Pointwise |sum_j a_j (i d/dt)^j u - lam u - nu| with centered order-4 stencils.

    Points whose stencil would leave the grid are NaN.
    """
    u = np.asarray(u, dtype=complex)
    ts, h = nu.ts, nu.h
    N = len(ts)
    n = spec.n
    width = stencil_width(n)
    if width > N:
        raise GridTooCoarse(f"stencil of width {width} needs at least {width} grid points, got {N}")
    half = width // 2
    out = np.full(N, np.nan)
    interior = slice(half, N - half)
    acc = -(complex(lam) * u + nu.values)
    for j in range(n + 1):
        coeff = evaluate_array(spec.coefficients[j], ts)
        if j == 0:
            acc = acc + coeff * u
            continue
        if not np.any(coeff != 0.0):
            continue
        deriv = np.zeros(N, dtype=complex)
        for r, cols, w in derivative_matrix_rows(N, h, j):
            deriv[r] = w @ u[cols]
        acc = acc + coeff * (1j ** j) * deriv
    out[interior] = np.abs(acc[interior])
    return out


def residual_norm(spec: OperatorSpec, lam: complex, u, nu: RhsFunction) -> float:
    """Sup over interior grid points of the pointwise residual."""
    prof = residual_profile(spec, lam, u, nu)
    return float(np.nanmax(prof)) if np.any(np.isfinite(prof)) else 0.0


# ---------------------------------------------------------------------------
# R(lam) u (t) = int_t^inf exp(lam (t - s)) u(s) ds on a uniform grid


def _check_uniform(grid) -> tuple[np.ndarray, float]:
    grid = np.asarray(grid, dtype=float)
    h = float(grid[1] - grid[0])
    if np.max(np.abs(np.diff(grid) - h)) > 1e-9 * h:
        raise ValueError("grid must be uniform")
    return grid, h


def apply_R(lam: complex, values, grid) -> np.ndarray:
    """R(lam) applied to samples that vanish at the last two grid points.

    Backward Simpson recursion on interleaved chains; fourth order.
    """
    grid, h = _check_uniform(grid)
    v = np.asarray(values, dtype=complex)
    lam = complex(lam)
    e1, e2 = np.exp(-lam * h), np.exp(-2.0 * lam * h)
    c = np.zeros(len(grid), dtype=complex)
    c[:-2] = (h / 3.0) * (v[:-2] + 4.0 * e1 * v[1:-1] + e2 * v[2:])
    # y_k = e2 y_{k+2} + c_k, run from the right end
    return lfilter([1.0], [1.0, 0.0, -e2], c[::-1])[::-1]


def apply_R_power(lam: complex, values, grid, m: int) -> np.ndarray:
    """R(lam)^m by repeated application."""
    out = np.asarray(values, dtype=complex)
    for _ in range(m):
        out = apply_R(lam, out, grid)
    return out


def R_power_direct(lam: complex, func: Callable[[float], complex], t: float, upper: float, m: int) -> complex:
    """(R^m u)(t) = int_t^upper (s - t)^(m-1) / (m-1)! exp(lam (t - s)) u(s) ds by adaptive quadrature."""
    from scipy.integrate import quad
    lam = complex(lam)

    def kern(s):
        return (s - t) ** (m - 1) / math.factorial(m - 1) * np.exp(lam * (t - s)) * func(s)

    re = quad(lambda s: kern(s).real, t, upper, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    im = quad(lambda s: kern(s).imag, t, upper, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    return complex(re, im)


@dataclass(frozen=True)
class WeightParams:
    """Weight w(t) = (1 + t)^tau."""

    tau: float = 0.0

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")

    def w(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.tau == 0.0:
            return np.ones_like(t)
        return (1.0 + t) ** self.tau


@dataclass
class BoundReport:
    lam: complex
    tau: float
    variant: str
    p: float
    bound: float
    ratios: np.ndarray = field(repr=False)
    violations: int = 0

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios, initial=0.0))

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _lp(values, h, p):
    a = np.abs(values)
    if math.isinf(p):
        return float(np.max(a, initial=0.0))
    return float((h * np.sum(a ** p)) ** (1.0 / p))


def _random_test_function(rng: np.random.Generator, grid: np.ndarray) -> np.ndarray:
    L = grid[-1]
    out = np.zeros(len(grid), dtype=complex)
    for _ in range(rng.integers(1, 5)):
        width = rng.uniform(0.5, 0.3 * L)
        a = rng.uniform(0.0, 0.95 * L - width)
        amp = complex(rng.normal(), rng.normal())
        out += amp * bump(a, a + width)(grid)
    return out


def weighted_R_bound_check(lam: complex, tau: float, grid, trials: int = 100, p: float = 2.0,
                           variant: str = "weighted", seed: int = 0, rel_slack: float = 1e-6) -> BoundReport:
    """Sampled operator-norm check of weighted versions of R(lam).

    ``variant``:
      - ``"weighted"``: (1+t)^tau R (1+s)^-tau, i.e. R measured in the norm
        |(1+t)^tau u|, bound 1 / Re lam;
      - ``"shifted"``: (1+t)^tau R (1+s)^-(tau+1), bound 2, for Re lam = 0;
      - ``"literal"``: (1+t)^-tau R (1+s)^tau with bound 1 / Re lam.  This
        orientation is not bounded by 1 / Re lam for tau > 0; it is kept
        as a diagnostic.
    For Re lam = 0 the shifted variant is always used.
    """
    lam = complex(lam)
    if lam.real < 0:
        raise ValueError("need Re lam >= 0")
    grid, h = _check_uniform(grid)
    wp = WeightParams(tau)
    if lam.real == 0.0:
        variant = "shifted"
    if variant == "weighted":
        pre, post, bound = 1.0 / wp.w(grid), wp.w(grid), 1.0 / lam.real
    elif variant == "shifted":
        pre, post, bound = 1.0 / (wp.w(grid) * (1.0 + grid)), wp.w(grid), 2.0
    elif variant == "literal":
        pre, post, bound = wp.w(grid), 1.0 / wp.w(grid), 1.0 / lam.real
    else:
        raise ValueError(f"unknown variant {variant!r}")
    rng = np.random.default_rng(seed)
    ratios = np.zeros(trials)
    for i in range(trials):
        u = _random_test_function(rng, grid)
        nu = _lp(u, h, p)
        if nu == 0.0:
            continue
        ratios[i] = _lp(post * apply_R(lam, pre * u, grid), h, p) / nu
    violations = int(np.sum(ratios > bound * (1.0 + rel_slack)))
    return BoundReport(lam=lam, tau=float(tau), variant=variant, p=p, bound=bound,
                       ratios=ratios, violations=violations)


# ---------------------------------------------------------------------------
# kernel decomposition


@dataclass
class KernelTerm:
    """g(t) (t - s)^k exp(lam_alpha (t - s)) h(s); g is n x m, h is m."""

    alpha: int
    k: int
    lambda_alpha: complex
    g_samples: np.ndarray = field(repr=False)
    h_samples: np.ndarray = field(repr=False)


@dataclass
class ResolventKernelDecomposition:
    """Last column of F(t) exp(Gamma (t - s)) F(s)^-1 as a sum of :class:`KernelTerm`."""

    lam: complex
    period: float
    ts: np.ndarray
    gamma: np.ndarray
    F_samples: np.ndarray
    F_inv_samples: np.ndarray
    terms: list[KernelTerm]
    similarity_condition: float

    def _index(self, t: float) -> int:
        tau = math.fmod(t, self.period)
        if tau < 0:
            tau += self.period
        i = int(np.argmin(np.abs(self.ts - tau)))
        if abs(self.ts[i] - tau) > 1e-9 * self.period:
            if abs(tau - self.period) <= 1e-9 * self.period:
                return 0
            raise ValueError(f"t = {t} is not on the sample grid")
        return i

    def reconstruct(self, t: float, s: float) -> np.ndarray:
        it, js = self._index(t), self._index(s)
        d = t - s
        out = np.zeros(self.gamma.shape[0], dtype=complex)
        for term in self.terms:
            out += term.g_samples[it] @ term.h_samples[js] * (d ** term.k) * np.exp(term.lambda_alpha * d)
        return out

    def direct(self, t: float, s: float) -> np.ndarray:
        it, js = self._index(t), self._index(s)
        P = self.F_samples[it] @ linalg.matrix_exp(self.gamma * (t - s)) @ self.F_inv_samples[js]
        return P[:, -1]


def decompose_resolvent_kernel(spec: OperatorSpec, lam: complex, sample_grid=None,
                               tol: float = DEFAULT_TOL) -> ResolventKernelDecomposition:
    """Split the resolvent kernel by the generalized eigenspaces of Gamma.

    exp(Gamma d) = sum_a V_a exp(lam_a d) sum_k N_a^k d^k / k! W_a, where the
    columns of V_a span the generalized eigenspace for lam_a, W_a are the
    matching rows of [V_1 ... V_r]^-1 and N_a is the nilpotent part.
    """
    lam = complex(lam)
    _require_inverse(spec, lam, tol)
    if sample_grid is None:
        sample_grid = np.linspace(0.0, spec.period, 65)
    fd = floquet_decomposition(spec, lam, sample_grid, tol)
    G = fd.gamma
    n = G.shape[0]
    res = linalg.eig(G)
    blocks = []
    for mu, size, spread in zip(res.eigenvalues, res.multiplicities, res.spreads):
        js = linalg.jordan_block_orders(G, mu, cluster_radius=np.inf, spread=spread)
        blocks.append((complex(mu), int(size), min(max(js.block_orders), int(size)),
                       linalg.generalized_eigenspace(G, mu, int(size))))
    V = np.hstack([b[3] for b in blocks])
    cond = float(np.linalg.cond(V))
    if cond > SIMILARITY_COND_LIMIT:
        warnings.warn(f"Jordan similarity condition number {cond:.3e}", IllConditionedSimilarity, stacklevel=2)
    W = np.linalg.inv(V)
    J = W @ G @ V
    Finv = np.linalg.inv(fd.F_samples)
    last = np.zeros(n)
    last[-1] = 1.0
    terms = []
    col = 0
    for alpha, (mu, size, order, Va) in enumerate(blocks, start=1):
        Wa = W[col:col + size]
        Na = J[col:col + size, col:col + size] - mu * np.eye(size)
        col += size
        h_s = np.einsum("ij,tjk,k->ti", Wa, Finv, last)
        Nk = np.eye(size, dtype=complex)
        for k in range(order):
            g_t = np.einsum("tij,jk->tik", fd.F_samples, Va @ Nk) / math.factorial(k)
            terms.append(KernelTerm(alpha=alpha, k=k, lambda_alpha=mu, g_samples=g_t, h_samples=h_s))
            Nk = Nk @ Na
    return ResolventKernelDecomposition(
        lam=lam, period=spec.period, ts=fd.ts, gamma=G, F_samples=fd.F_samples, F_inv_samples=Finv,
        terms=terms, similarity_condition=cond,
    )
