"""Integro-differential perturbations and sampled absence-of-eigenvalue certificates.

The perturbed operator is ``H = A + B`` with

    (B u)(t) = sum_j b_j(t) D^j u(t) + sum_j int k_j(t, s) D^j u(s) ds.

A real or complex ``lam`` is certified not to be an eigenvalue of H when the
multiplicator hypothesis holds at ``lam``, every ``(1+t)^delta b_j`` is
bounded, every ``k_j`` vanishes below the diagonal, the weighted kernel
operators look bounded, and ``delta`` exceeds the maximal Jordan order ``l``
of the unimodular multiplicators.  All decay and boundedness checks are
sampled; they can falsify a hypothesis but never prove it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, evaluate_array, free_vars, is_zero_literal, parse, unparse
from .floquet import DEFAULT_EPSILON_CIRCLE, Location, classify_multiplicators
from .hill import HillSpec, classify_hill_point
from .periodic_ode import DEFAULT_TOL, OperatorSpec, SpecError, monodromy

__all__ = [
    "Domain", "Verdict", "PerturbationSpec", "DecayCheck", "SubdiagonalCheck", "SchurCheck",
    "AbsenceCertificate", "verify_decay", "check_subdiagonal", "schur_kernel_bound", "certify_absence",
    "DEFAULT_T_MAX", "DEFAULT_BLOCK_SAMPLES", "DEFAULT_SLOPE_TOL",
]

DEFAULT_T_MAX = 4096.0
DEFAULT_BLOCK_SAMPLES = 256
DEFAULT_SLOPE_TOL = 0.05
SUBDIAGONAL_TOL = 1e-12
SUBDIAGONAL_T_MAX = 64.0
SCHUR_T_MAX = 512.0
SCHUR_BLOCK_SAMPLES = 64


class Domain(str, enum.Enum):
    HALF_LINE = "HalfLine"
    WHOLE_LINE = "WholeLine"


class Verdict(str, enum.Enum):
    CERTIFIED = "CertifiedNoEigenvalue"
    INCONCLUSIVE = "Inconclusive"
    VIOLATED = "ConditionsViolated"


def _below_diagonal(t, s, domain: Domain):
    if domain is Domain.HALF_LINE:
        return t > s
    return np.abs(t) > np.abs(s)


@dataclass(frozen=True)
class PerturbationSpec:
    """Coefficients ``b_0..b_n`` in t and kernels ``k_0..k_n`` in (t, s); ``b_n = k_n = 0``.

    With ``zero_below_diagonal`` the kernels are understood as multiplied by
    the indicator of ``t <= s`` (``|t| <= |s|`` on the whole line), so a
    formula such as ``exp(t - s)`` need not encode its support.
    """

    n: int
    b: tuple[Expr, ...]
    k: tuple[Expr, ...]
    delta: float
    domain: Domain = Domain.HALF_LINE
    zero_below_diagonal: bool = False

    def __post_init__(self):
        if len(self.b) != self.n + 1 or len(self.k) != self.n + 1:
            raise SpecError(f"need {self.n + 1} coefficients b_j and kernels k_j")
        if not self.delta > 0:
            raise SpecError("declared delta must be positive")
        for j, e in enumerate(self.b):
            if free_vars(e) - {"t"}:
                raise SpecError(f"b_{j} may only depend on t")
        for j, e in enumerate(self.k):
            if free_vars(e) - {"t", "s"}:
                raise SpecError(f"k_{j} may only depend on t and s")
        ts = np.linspace(-8.0, 8.0, 33) + 0.137
        if np.any(evaluate_array(self.b[-1], ts) != 0.0):
            raise SpecError("b_n must vanish identically")
        tt, ss = np.meshgrid(ts, ts, indexing="ij")
        if np.any(evaluate_array(self.k[-1], tt, ss) != 0.0):
            raise SpecError("k_n must vanish identically")

    @classmethod
    def zero(cls, n: int, delta: float = 1.0, domain: Domain = Domain.HALF_LINE) -> "PerturbationSpec":
        z = tuple(parse("0") for _ in range(n + 1))
        return cls(n, z, z, delta, domain)

    @classmethod
    def from_strings(cls, b, k=None, delta: float = 1.0, domain="HalfLine",
                     zero_below_diagonal: bool = False) -> "PerturbationSpec":
        bs = tuple(parse(x) for x in b)
        ks = tuple(parse(x) for x in (k if k is not None else ["0"] * len(bs)))
        return cls(len(bs) - 1, bs, ks, float(delta), Domain(domain), bool(zero_below_diagonal))

    @classmethod
    def from_dict(cls, data: dict) -> "PerturbationSpec":
        spec = cls.from_strings(data["b"], data.get("k"), data["delta"], data.get("domain", "HalfLine"),
                                data.get("zero_below_diagonal", False))
        if "order" in data and int(data["order"]) != spec.n:
            raise SpecError(f"order {data['order']} does not match {len(data['b'])} coefficients")
        return spec

    def to_dict(self) -> dict:
        return {
            "order": self.n, "b": [unparse(e) for e in self.b], "k": [unparse(e) for e in self.k],
            "delta": self.delta, "domain": self.domain.value, "zero_below_diagonal": self.zero_below_diagonal,
        }

    @property
    def has_kernels(self) -> bool:
        return not all(is_zero_literal(e) for e in self.k)

    def b_values(self, j: int, t) -> np.ndarray:
        return evaluate_array(self.b[j], t)

    def kernel_values(self, j: int, t, s) -> np.ndarray:
        """k_j(t, s) with the support restriction applied.  Masked entries are never evaluated."""
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        out = np.zeros(t.shape)
        keep = ~_below_diagonal(t, s, self.domain) if self.zero_below_diagonal else np.ones(t.shape, bool)
        if np.any(keep):
            out[keep] = evaluate_array(self.k[j], t[keep], s[keep])
        return out


@dataclass(frozen=True)
class DecayCheck:
    passed: bool
    worst_sample: float
    trend_slope: float
    block_sups: tuple[float, ...] = field(repr=False, default=())


def _dyadic_grid(t_max: float, samples: int) -> list[np.ndarray]:
    blocks = [np.linspace(0.0, 1.0, samples)]
    lo = 1.0
    while lo < t_max:
        hi = min(2.0 * lo, t_max)
        blocks.append(np.linspace(lo, hi, samples))
        lo = hi
    return blocks


def _trend(sups: np.ndarray) -> float:
    logs = np.log(np.maximum(sups, 1e-300))
    if len(logs) < 2:
        return 0.0
    return float(np.polyfit(np.arange(len(logs)), logs, 1)[0])


def verify_decay(f: Expr, delta: float, t_max: float = DEFAULT_T_MAX, samples: int = DEFAULT_BLOCK_SAMPLES,
                 slope_tol: float = DEFAULT_SLOPE_TOL, domain: Domain = Domain.HALF_LINE) -> DecayCheck:
    """Sampled test that (1 + |t|)^delta |f(t)| stays bounded.

    The weighted function is sampled on the dyadic blocks [0, 1], [1, 2],
    [2, 4], ... up to ``t_max`` (mirrored on the whole line).  It passes when
    every sample is finite and the least-squares slope of log(block sup)
    against block index is at most ``slope_tol``.
    """
    if t_max < 64 or samples < 256:
        raise ValueError("need t_max >= 64 and samples >= 256")
    sups = []
    for blk in _dyadic_grid(t_max, samples):
        pts = np.concatenate([blk, -blk]) if domain is Domain.WHOLE_LINE else blk
        with np.errstate(over="ignore", invalid="ignore"):
            w = (1.0 + np.abs(pts)) ** delta * np.abs(evaluate_array(f, pts))
        sups.append(float(np.max(w)))
    sups = np.array(sups)
    finite = bool(np.all(np.isfinite(sups)))
    worst = float(np.max(sups)) if finite else float("inf")
    if not finite:
        return DecayCheck(False, worst, float("inf"), tuple(sups))
    if np.all(sups == 0.0):
        return DecayCheck(True, 0.0, 0.0, tuple(sups))
    slope = _trend(sups)
    return DecayCheck(slope <= slope_tol, worst, slope, tuple(sups))


@dataclass(frozen=True)
class SubdiagonalCheck:
    passed: bool
    worst_violation: float
    worst_at: tuple[float, float] | None = None


def check_subdiagonal(kernel: Expr, t_max: float = SUBDIAGONAL_T_MAX, samples: int = 257,
                      domain: Domain = Domain.HALF_LINE, zero_below_diagonal: bool = False) -> SubdiagonalCheck:
    """max |k(t, s)| over grid points with t > s (|t| > |s| on the whole line) must be <= 1e-12."""
    if zero_below_diagonal:
        return SubdiagonalCheck(True, 0.0, None)
    lo = -t_max if domain is Domain.WHOLE_LINE else 0.0
    g = np.linspace(lo, t_max, samples)
    tt, ss = np.meshgrid(g, g, indexing="ij")
    below = _below_diagonal(tt, ss, domain)
    vals = np.abs(evaluate_array(kernel, tt[below], ss[below]))
    if vals.size == 0:
        return SubdiagonalCheck(True, 0.0, None)
    i = int(np.argmax(vals))
    worst = float(vals[i])
    at = (float(tt[below][i]), float(ss[below][i])) if worst > 0.0 else None
    return SubdiagonalCheck(worst <= SUBDIAGONAL_TOL, worst, at)


@dataclass(frozen=True)
class SchurCheck:
    """Sampled row and column L1 sums of (1 + |t|)^delta k(t, s); evidence only."""

    passed: bool
    row_sup: float
    col_sup: float
    row_slope: float
    col_slope: float


def schur_kernel_bound(pert: PerturbationSpec, j: int, delta: float | None = None,
                       t_max: float = SCHUR_T_MAX, samples: int = SCHUR_BLOCK_SAMPLES,
                       slope_tol: float = DEFAULT_SLOPE_TOL) -> SchurCheck:
    """Schur-type evidence that the weighted kernel operator is bounded.

    Row sums sup_t int |K_w(t, s)| ds and column sums sup_s int |K_w(t, s)| dt
    on a dyadic trapezoid grid.  Passes when both are finite and their block
    sups do not grow across dyadic scales.
    """
    delta = pert.delta if delta is None else delta
    blocks = _dyadic_grid(t_max, samples)
    g = np.unique(np.concatenate(blocks))
    if pert.domain is Domain.WHOLE_LINE:
        g = np.unique(np.concatenate([-g, g]))
    wts = np.zeros_like(g)
    dg = np.diff(g)
    wts[:-1] += dg / 2
    wts[1:] += dg / 2
    tt, ss = np.meshgrid(g, g, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        K = np.abs(pert.kernel_values(j, tt, ss)) * (1.0 + np.abs(tt)) ** delta
    rows = K @ wts
    cols = wts @ K
    finite = bool(np.all(np.isfinite(rows)) and np.all(np.isfinite(cols)))
    if not finite:
        return SchurCheck(False, float("inf"), float("inf"), float("inf"), float("inf"))
    edges = [b[-1] for b in blocks]
    absg = np.abs(g)

    def block_sups(v):
        out, lo = [], -1.0
        for hi in edges:
            sel = (absg > lo) & (absg <= hi)
            out.append(float(np.max(v[sel])) if np.any(sel) else 0.0)
            lo = hi
        return np.array(out)

    rs, cs = block_sups(rows), block_sups(cols)
    r_slope = _trend(rs) if np.any(rs > 0) else 0.0
    c_slope = _trend(cs) if np.any(cs > 0) else 0.0
    return SchurCheck(r_slope <= slope_tol and c_slope <= slope_tol,
                      float(np.max(rows)), float(np.max(cols)), r_slope, c_slope)


@dataclass
class AbsenceCertificate:
    lam: complex
    l: int
    delta: float
    domain: Domain
    multiplicators: list[complex]
    multiplicator_precondition: bool
    delta_checks: list[DecayCheck]
    subdiagonal_checks: list[SubdiagonalCheck]
    kernel_checks: list[SchurCheck | None]
    verdict: Verdict
    reason: str = ""

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED


def _is_hill(op: OperatorSpec) -> bool:
    try:
        HillSpec.from_operator(op)
    except ValueError:
        return False
    return True


def certify_absence(op: OperatorSpec, pert: PerturbationSpec, lam: complex, tol: float = DEFAULT_TOL,
                    epsilon_circle: float = DEFAULT_EPSILON_CIRCLE, t_max: float = DEFAULT_T_MAX,
                    samples: int = DEFAULT_BLOCK_SAMPLES, slope_tol: float = DEFAULT_SLOPE_TOL) -> AbsenceCertificate:
    """Check the sufficient conditions for ``lam`` not to be an eigenvalue of A + B.

    Half-line: no multiplicator inside the unit circle.  Whole line: every
    multiplicator unimodular.  Then ``delta > l`` together with the decay,
    support and kernel checks gives the certificate.

    For a Hill operator at real ``lam`` the Hill edge window also applies:
    within ``edge_band_eps`` of a gapped edge, ``l`` is taken as 2 even when
    the two multiplicators are still resolved apart.
    """
    if op.n != pert.n:
        raise SpecError(f"operator order {op.n} and perturbation order {pert.n} differ")
    lam = complex(lam)
    U = monodromy(op, lam, tol).monodromy
    ms = classify_multiplicators(U, epsilon_circle)
    if pert.domain is Domain.HALF_LINE:
        pre_ok = not ms.at(Location.INSIDE)
    else:
        pre_ok = ms.all_unimodular
    l = ms.l
    if lam.imag == 0.0 and l > 0 and _is_hill(op):
        l = max(l, classify_hill_point(op, lam.real, tol).l)
    decay = [verify_decay(pert.b[j], pert.delta, t_max, samples, slope_tol, pert.domain) for j in range(pert.n)]
    subdiag = [check_subdiagonal(pert.k[j], domain=pert.domain, zero_below_diagonal=pert.zero_below_diagonal)
               for j in range(pert.n)]
    kernels = [None if is_zero_literal(pert.k[j]) else schur_kernel_bound(pert, j, slope_tol=slope_tol)
               for j in range(pert.n)]

    if not pre_ok:
        verdict, reason = Verdict.INCONCLUSIVE, "multiplicator hypothesis not met"
    elif not all(c.passed for c in decay):
        bad = [j for j, c in enumerate(decay) if not c.passed]
        verdict, reason = Verdict.VIOLATED, f"(1+t)^delta b_j not bounded for j in {bad}"
    elif not all(c.passed for c in subdiag):
        bad = [j for j, c in enumerate(subdiag) if not c.passed]
        verdict, reason = Verdict.VIOLATED, f"kernel k_j not subdiagonal for j in {bad}"
    elif not all(c is None or c.passed for c in kernels):
        bad = [j for j, c in enumerate(kernels) if c is not None and not c.passed]
        verdict, reason = Verdict.VIOLATED, f"weighted kernel operator looks unbounded for j in {bad}"
    elif not pert.delta > l:
        verdict, reason = Verdict.INCONCLUSIVE, f"declared delta {pert.delta:g} does not exceed l = {l}"
    else:
        verdict, reason = Verdict.CERTIFIED, ""
    return AbsenceCertificate(
        lam=lam, l=l, delta=pert.delta, domain=pert.domain,
        multiplicators=[m.rho for m in ms.entries], multiplicator_precondition=pre_ok,
        delta_checks=decay, subdiagonal_checks=subdiag, kernel_checks=kernels,
        verdict=verdict, reason=reason,
    )
