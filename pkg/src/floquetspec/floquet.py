"""Floquet multiplicators, their Jordan structure, and the Floquet factor F(t)."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .periodic_ode import DEFAULT_TOL, OperatorSpec, matriciant_samples, monodromy

__all__ = [
    "Location", "Invertibility", "Multiplicator", "MultiplicatorSet", "FloquetDecomposition",
    "classify_multiplicators", "max_unimodular_jordan_order", "halfline_invertibility",
    "wholeline_spectrum_membership", "floquet_decomposition", "multiplicators_at",
    "DEFAULT_EPSILON_CIRCLE",
]

DEFAULT_EPSILON_CIRCLE = 1e-6


class Location(str, enum.Enum):
    INSIDE = "Inside"
    ON_CIRCLE = "OnCircle"
    OUTSIDE = "Outside"


class Invertibility(str, enum.Enum):
    INVERSE_EXISTS = "InverseExists"
    NO_INVERSE = "NoInverse"


@dataclass(frozen=True)
class Multiplicator:
    rho: complex
    algebraic_mult: int
    geometric_mult: int
    block_orders: tuple[int, ...]
    location: Location
    circle_distance: float


@dataclass
class MultiplicatorSet:
    entries: list[Multiplicator]
    epsilon_circle: float

    @property
    def l(self) -> int:
        orders = [max(m.block_orders) for m in self.entries if m.location is Location.ON_CIRCLE]
        return max(orders, default=0)

    @property
    def n(self) -> int:
        return sum(m.algebraic_mult for m in self.entries)

    def at(self, location: Location) -> list[Multiplicator]:
        return [m for m in self.entries if m.location is location]

    @property
    def all_unimodular(self) -> bool:
        return all(m.location is Location.ON_CIRCLE for m in self.entries)


def _locate(rho: complex, eps: float) -> Location:
    r = abs(rho)
    if abs(r - 1.0) <= eps:
        return Location.ON_CIRCLE
    return Location.INSIDE if r < 1.0 else Location.OUTSIDE


def _reconcile(orders: tuple[int, ...], size: int) -> tuple[int, ...]:
    # the staircase at a cluster mean can disagree with the cluster size by
    # numerical noise; the cluster size is authoritative
    out = sorted(orders, reverse=True)
    while sum(out) > size:
        out[0] -= 1
        out = sorted((o for o in out if o > 0), reverse=True)
    out += [1] * (size - sum(out))
    return tuple(sorted(out, reverse=True))


def classify_multiplicators(U, epsilon_circle: float = DEFAULT_EPSILON_CIRCLE,
                            cluster_radius: float | None = None,
                            rank_tol: float = linalg.DEFAULT_RANK_TOL) -> MultiplicatorSet:
    """Cluster the eigenvalues of a monodromy matrix and place them against the unit circle."""
    U = np.asarray(U, dtype=complex)
    res = linalg.eig(U, cluster_radius=cluster_radius, rank_tol=rank_tol)
    search = linalg.DEFECT_SEARCH_RADIUS * max(1.0, float(np.linalg.norm(U, 2)))
    entries = []
    for rho, size, spread in zip(res.eigenvalues, res.multiplicities, res.spreads):
        js = linalg.jordan_block_orders(U, rho, rank_tol=rank_tol, cluster_radius=search, spread=spread)
        orders = _reconcile(js.block_orders, int(size))
        entries.append(Multiplicator(
            rho=complex(rho),
            algebraic_mult=int(size),
            geometric_mult=len(orders),
            block_orders=orders,
            location=_locate(rho, epsilon_circle),
            circle_distance=abs(abs(rho) - 1.0),
        ))
    return MultiplicatorSet(entries=entries, epsilon_circle=epsilon_circle)


def max_unimodular_jordan_order(U, epsilon_circle: float = DEFAULT_EPSILON_CIRCLE) -> int:
    return classify_multiplicators(U, epsilon_circle).l


def halfline_invertibility(ms: MultiplicatorSet) -> Invertibility:
    """No inverse on the half-line exactly when some multiplicator lies inside the circle."""
    if ms.at(Location.INSIDE):
        return Invertibility.NO_INVERSE
    return Invertibility.INVERSE_EXISTS


def wholeline_spectrum_membership(ms: MultiplicatorSet) -> bool:
    """lam is in the whole-line spectrum iff some multiplicator is unimodular."""
    return bool(ms.at(Location.ON_CIRCLE))


def multiplicators_at(spec: OperatorSpec, lam: complex, tol: float = DEFAULT_TOL,
                      epsilon_circle: float = DEFAULT_EPSILON_CIRCLE):
    """Monodromy at ``lam`` and its classified multiplicators."""
    mat = monodromy(spec, lam, tol)
    return mat, classify_multiplicators(mat.monodromy, epsilon_circle)


@dataclass
class FloquetDecomposition:
    """U(t) = F(t) exp(t Gamma) with F periodic and U(T) = exp(T Gamma)."""

    lam: complex
    period: float
    gamma: np.ndarray
    monodromy: np.ndarray
    ts: np.ndarray
    F_samples: np.ndarray
    U_samples: np.ndarray
    warnings: list[str] = field(default_factory=list)

    @property
    def F_period(self) -> np.ndarray:
        """F(T) = U(T) exp(-T Gamma); equals I for any valid logarithm branch."""
        return self.monodromy @ linalg.matrix_exp(-self.period * self.gamma)

    def F(self, t) -> np.ndarray:
        """F at arbitrary t by periodic continuation of the stored samples (exact sample times only)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tau = np.mod(t, self.period)
        idx = np.searchsorted(self.ts, tau)
        idx = np.clip(idx, 0, len(self.ts) - 1)
        lo = np.clip(idx - 1, 0, len(self.ts) - 1)
        pick = np.where(np.abs(self.ts[lo] - tau) < np.abs(self.ts[idx] - tau), lo, idx)
        if np.any(np.abs(self.ts[pick] - tau) > 1e-9 * self.period):
            raise ValueError("F requested at a time that was not sampled")
        return self.F_samples[pick]


def floquet_decomposition(spec: OperatorSpec, lam: complex, ts=None, tol: float = DEFAULT_TOL,
                          cluster_radius: float | None = None) -> FloquetDecomposition:
    """Gamma = log U(T) / T and F(t) = U(t) exp(-t Gamma) at the requested sample times."""
    T = spec.period
    if ts is None:
        ts = np.linspace(0.0, T, 65)
    ts = np.asarray(ts, dtype=float)
    grid = np.union1d(ts, [T])
    mat = matriciant_samples(spec, lam, grid, tol)
    UT = mat.samples[-1]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", linalg.BranchAmbiguity)
        gamma = linalg.matrix_log(UT, cluster_radius) / T
    keep = np.isin(grid, ts)
    Us = mat.samples[keep]
    Fs = np.array([U @ linalg.matrix_exp(-t * gamma) for t, U in zip(ts, Us)])
    return FloquetDecomposition(
        lam=complex(lam), period=T, gamma=gamma, monodromy=UT, ts=ts,
        F_samples=Fs, U_samples=Us,
        warnings=[str(w.message) for w in caught if issubclass(w.category, linalg.BranchAmbiguity)],
    )
