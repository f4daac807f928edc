"""Finite-difference sections of H = A + B on [0, L] and an eigenvalue hunt.

The hunt is corroboration, not verification: it looks for eigenvalues of
Dirichlet truncations that stay put as L grows and whose eigenvectors do
not pile up at the artificial boundary.
"""
from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .expr import evaluate_array, is_zero_literal, to_callable
from .fd import derivative_matrix_rows, stencil_width
from .perturbation import PerturbationSpec
from .periodic_ode import OperatorSpec, SpecError

__all__ = [
    "GridOperator", "Classification", "Candidate", "EigenHuntReport", "MemoryBudgetExceeded",
    "assemble_operator", "hunt_eigenvalues", "shoot", "shooting_bound_state", "shooting_embedded",
    "DEFAULT_CAP", "DEFAULT_LENGTHS", "DEFAULT_H", "DEFAULT_LOC_TOL", "DEFAULT_DRIFT_TOL",
]

DEFAULT_CAP = 8192
DEFAULT_LENGTHS = (20.0, 40.0, 80.0)
DEFAULT_H = 1.0 / 64.0
DEFAULT_LOC_TOL = 1e-3
DEFAULT_DRIFT_TOL = 1e-3
BOUNDARY_FRACTION = 0.1
LABEL = "corroboration (finite sections), not a proof"


class MemoryBudgetExceeded(MemoryError):
    pass


@dataclass
class GridOperator:
    L: float
    h: float
    N: int
    ts: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    kernel_matrix: np.ndarray | None = field(default=None, repr=False)
    scheme: str = ""

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _derivative_matrix(npts: int, h: float, order: int) -> np.ndarray:
    """Dense order-``order`` derivative on the full grid of ``npts`` nodes."""
    D = np.zeros((npts, npts))
    for r, cols, w in derivative_matrix_rows(npts, h, order):
        D[r, cols] = w
    return D


def assemble_operator(op: OperatorSpec, pert: PerturbationSpec | None, L: float, h: float = DEFAULT_H,
                      cap: int = DEFAULT_CAP) -> GridOperator:
    """Dense matrix of H on the interior nodes of [0, L] with u(0) = u(L) = 0.

    D^j = (i d/dt)^j uses order-4 stencils (centered inside, shifted near the
    ends).  Kernel terms use the trapezoid rule, K[r, l] = h k_j(t_r, s_l),
    composed with the same D^j stencil.
    """
    T = op.period
    if h > T / 32 * (1 + 1e-12):
        raise SpecError(f"h = {h} does not resolve the period (need h <= T/32)")
    periods = L / T
    if abs(periods - round(periods)) > 1e-9 * max(1.0, periods):
        raise SpecError("L must be a multiple of the period")
    N = int(round(L / h))
    if abs(N * h - L) > 1e-9 * L:
        raise SpecError("L must be a multiple of h")
    if N - 1 > cap:
        raise MemoryBudgetExceeded(f"{N - 1} unknowns exceed the cap of {cap}")
    if pert is not None and pert.n != op.n:
        raise SpecError(f"operator order {op.n} and perturbation order {pert.n} differ")
    full = np.linspace(0.0, L, N + 1)
    ts = full[1:-1]
    inner = slice(1, N)
    M = np.zeros((N - 1, N - 1), dtype=complex)
    Kall = None
    for j in range(op.n + 1):
        c = evaluate_array(op.coefficients[j], ts)
        if pert is not None:
            c = c + pert.b_values(j, ts)
        has_kernel = pert is not None and not is_zero_literal(pert.k[j])
        if not np.any(c != 0.0) and not has_kernel:
            continue
        Dj = _derivative_matrix(N + 1, h, j)[inner, inner] * (1j ** j)
        M += c[:, None] * Dj
        if has_kernel:
            tt, ss = np.meshgrid(ts, ts, indexing="ij")
            K = h * pert.kernel_values(j, tt, ss)
            if j == 0:
                Kall = K
                M += K
            else:
                M += K @ Dj
    if np.all(M.imag == 0.0):
        M = M.real.copy()
    width = max(stencil_width(j) for j in range(1, op.n + 1))
    return GridOperator(L=float(L), h=float(h), N=N, ts=ts, matrix=M, kernel_matrix=Kall,
                        scheme=f"order-4 finite differences (width {width}), trapezoid kernels, Dirichlet")


class Classification(str, enum.Enum):
    GENUINE = "Genuine"
    ARTIFACT = "TruncationArtifact"
    UNRESOLVED = "Unresolved"


@dataclass
class Candidate:
    lam: complex
    per_length: list[complex | None]
    localization: float
    drift: float
    classification: Classification


@dataclass
class EigenHuntReport:
    lengths: list[float]
    h: float
    window: tuple[float, float, float, float]
    loc_tol: float
    drift_tol: float
    candidates: list[Candidate]
    seconds: float = 0.0
    label: str = LABEL

    @property
    def genuine(self) -> list[Candidate]:
        return [c for c in self.candidates if c.classification is Classification.GENUINE]


def _in_window(lam: np.ndarray, window) -> np.ndarray:
    re0, re1, im0, im1 = window
    return (lam.real >= re0) & (lam.real <= re1) & (lam.imag >= im0) & (lam.imag <= im1)


def _solve(op, pert, window, L, h, cap):
    g = assemble_operator(op, pert, L, h, cap)
    lam, vecs = scipy.linalg.eig(g.matrix, overwrite_a=True, check_finite=False)
    keep = _in_window(lam, window)
    lam, vecs = lam[keep], vecs[:, keep]
    mass = np.abs(vecs) ** 2
    tail = g.ts > (1.0 - BOUNDARY_FRACTION) * L
    loc = mass[tail].sum(axis=0) / mass.sum(axis=0)
    order = np.lexsort((lam.imag, lam.real))
    return lam[order], loc[order]


def hunt_eigenvalues(op: OperatorSpec, pert: PerturbationSpec | None, window, lengths=DEFAULT_LENGTHS,
                     h: float = DEFAULT_H, loc_tol: float = DEFAULT_LOC_TOL, drift_tol: float = DEFAULT_DRIFT_TOL,
                     threads: int = 1, cap: int = DEFAULT_CAP) -> EigenHuntReport:
    """Eigenvalues of Dirichlet sections inside ``window = (re_min, re_max, im_min, im_max)``.

    Candidates of consecutive lengths are paired by minimum-cost assignment
    (cost |lam_a - lam_b|, pairs farther than 10 * drift_tol rejected).  A
    chain across all lengths is Genuine when its eigenvectors keep at most
    ``loc_tol`` of their mass in the last 10% of the interval and its
    eigenvalues spread by at most ``drift_tol``; otherwise a
    TruncationArtifact.  Incomplete chains are Unresolved.
    """
    lengths = [float(x) for x in lengths]
    if len(lengths) < 3 or any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError("need at least three strictly increasing lengths")
    window = tuple(float(x) for x in window)
    start = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda L: _solve(op, pert, window, L, h, cap), lengths))
    else:
        results = [_solve(op, pert, window, L, h, cap) for L in lengths]

    # chains: list of per-length indices (None where unmatched)
    nlen = len(lengths)
    chains: list[list[int | None]] = [[i] + [None] * (nlen - 1) for i in range(len(results[0][0]))]
    tail_of = {i: c for i, c in enumerate(chains)}
    for a in range(nlen - 1):
        la, lb = results[a][0], results[a + 1][0]
        next_tail: dict[int, list[int | None]] = {}
        matched_b = set()
        if len(la) and len(lb):
            cost = np.abs(la[:, None] - lb[None, :])
            rows, cols = linear_sum_assignment(cost)
            for r, c in zip(rows, cols):
                if cost[r, c] <= 10.0 * drift_tol and r in tail_of:
                    tail_of[r][a + 1] = int(c)
                    next_tail[int(c)] = tail_of[r]
                    matched_b.add(int(c))
        for c in range(len(lb)):
            if c not in matched_b:
                chain: list[int | None] = [None] * nlen
                chain[a + 1] = c
                chains.append(chain)
                next_tail[c] = chain
        tail_of = next_tail

    cands = []
    for chain in chains:
        vals = [results[k][0][i] if i is not None else None for k, i in enumerate(chain)]
        locs = [results[k][1][i] for k, i in enumerate(chain) if i is not None]
        present = [v for v in vals if v is not None]
        arr = np.array(present)
        drift = float(np.max(np.abs(arr[:, None] - arr[None, :]))) if len(arr) > 1 else float("inf")
        loc = float(max(locs))
        if any(v is None for v in vals):
            cls = Classification.UNRESOLVED
        elif loc <= loc_tol and drift <= drift_tol:
            cls = Classification.GENUINE
        else:
            cls = Classification.ARTIFACT
        cands.append(Candidate(lam=complex(present[-1]), per_length=[None if v is None else complex(v) for v in vals],
                               localization=loc, drift=drift, classification=cls))
    cands.sort(key=lambda c: (c.lam.real, c.lam.imag))
    return EigenHuntReport(lengths=lengths, h=h, window=window, loc_tol=loc_tol, drift_tol=drift_tol,
                           candidates=cands, seconds=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# shooting oracle for second-order problems -u'' + q(t) u = E u, u(0) = 0


def _potential(op: OperatorSpec, pert: PerturbationSpec | None):
    if op.n != 2 or not is_zero_literal(op.coefficients[1]):
        raise SpecError("shooting needs a Hill-type operator (order 2, a_1 = 0)")
    fs = [to_callable(op.coefficients[0])]
    if pert is not None:
        if pert.has_kernels or not is_zero_literal(pert.b[1]):
            raise SpecError("shooting needs a pure potential perturbation b_0")
        fs.append(to_callable(pert.b[0]))
    return lambda t: sum(f(t) for f in fs)


def shoot(op: OperatorSpec, pert: PerturbationSpec | None, E: float, t_end: float,
          t_eval=None, rtol: float = 1e-11) -> np.ndarray:
    """(u, u') of -u'' + q u = E u from u(0) = 0, u'(0) = 1; at t_end, or at ``t_eval`` rows."""
    q = _potential(op, pert)
    sol = solve_ivp(lambda t, y: (y[1], (q(t) - E) * y[0]), (0.0, t_end), (0.0, 1.0),
                    method="DOP853", rtol=rtol, atol=1e-13, t_eval=t_eval)
    if not sol.success:
        raise ArithmeticError(sol.message)
    return sol.y.T if t_eval is not None else sol.y[:, -1]


def shooting_bound_state(op: OperatorSpec, pert: PerturbationSpec | None, lo: float, hi: float,
                         t_end: float) -> float:
    """Dirichlet eigenvalue in [lo, hi] as the root of u(t_end; E)."""
    return brentq(lambda E: shoot(op, pert, E, t_end)[0], lo, hi, xtol=1e-13)


def shooting_embedded(op: OperatorSpec, pert: PerturbationSpec | None, lo: float, hi: float,
                      t_end: float = 40.0, t_coarse: float = 10.0) -> float:
    """Energy in [lo, hi] (> 0) at which the solution with u(0) = 0 decays.

    Minimizes the log of the late envelope mean(u^2 + u'^2 / E) over the
    last oscillation before the horizon.  The dip narrows like 1 / t^2, so
    a grid scan and search at ``t_coarse`` bracket it before refining at ``t_end``.
    """
    if lo <= 0:
        raise ValueError("embedded search needs E > 0")

    def envelope(E, horizon):
        k = math.sqrt(E)
        late = np.linspace(horizon - math.pi / k, horizon, 33)
        y = shoot(op, pert, E, horizon, t_eval=late)
        return math.log(np.mean(y[:, 0] ** 2 + y[:, 1] ** 2 / E))

    grid = np.linspace(lo, hi, 121)
    i = int(np.argmin([envelope(E, t_coarse) for E in grid]))
    coarse = minimize_scalar(lambda E: envelope(E, t_coarse), method="bounded",
                             bounds=(grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]),
                             options={"xatol": 1e-6})
    width = 4.0 * (t_coarse / t_end) ** 2 * max(abs(coarse.x), 1.0) * 1e-2
    a, b = max(lo, coarse.x - width), min(hi, coarse.x + width)
    fine = minimize_scalar(lambda E: envelope(E, t_end), bounds=(a, b), method="bounded",
                           options={"xatol": 1e-10})
    return float(fine.x)
