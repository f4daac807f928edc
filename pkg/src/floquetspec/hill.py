"""Hill operator ``D^2 + p(t) = -d^2/dt^2 + p``: discriminant, bands, band edges."""
from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .expr import Expr, parse
from .floquet import classify_multiplicators
from .periodic_ode import DEFAULT_TOL, OperatorSpec, monodromy

__all__ = [
    "HillSpec", "Edge", "BandStructure", "HillPointKind", "HillPoint", "ResolutionTooCoarse",
    "discriminant", "band_structure", "classify_hill_point", "DEFAULT_EDGE_BAND_EPS",
]

DEFAULT_EDGE_BAND_EPS = 1e-7
EDGE_REFINE_TOL = 1e-9
# edges are located and classified with a tighter integrator tolerance: near a
# narrow gap Delta' is tiny, and the integration error in Delta moves the root
# by error / |Delta'|, splitting the double multiplicator
EDGE_INTEGRATION_TOL = 1e-13
# an extremum of the discriminant this close to +-2 is a closed gap, not two edges
TOUCH_TOL = 1e-8


class ResolutionTooCoarse(UserWarning):
    """Two band edges fell inside one grid cell."""


@dataclass(frozen=True)
class HillSpec:
    potential: Expr
    period: float = 1.0

    @classmethod
    def from_string(cls, potential: str, period: float = 1.0) -> "HillSpec":
        return cls(parse(potential), float(period))

    @classmethod
    def from_operator(cls, op: OperatorSpec) -> "HillSpec":
        from .expr import evaluate_array
        ts = np.linspace(0, op.period, 17)
        if op.n != 2 or np.any(evaluate_array(op.coefficients[1], ts) != 0.0):
            raise ValueError("not a Hill operator: need order 2 with a_1 = 0")
        return cls(op.coefficients[0], op.period)

    @property
    def operator(self) -> OperatorSpec:
        return OperatorSpec(n=2, period=self.period,
                            coefficients=(self.potential, parse("0"), parse("1")))


def _op(spec) -> OperatorSpec:
    return spec.operator if isinstance(spec, HillSpec) else spec


def discriminant(spec, lam: complex, tol: float = DEFAULT_TOL) -> complex:
    """Delta(lam) = tr U(T)."""
    return complex(np.trace(monodromy(_op(spec), lam, tol).monodromy))


def _real_discriminant(op: OperatorSpec, lam: float, tol: float) -> float:
    d = discriminant(op, lam, tol)
    if abs(d.imag) > 1e-9 * max(1.0, abs(d.real)):
        raise ArithmeticError(f"discriminant is not real at real lambda={lam}: {d}")
    return d.real


@dataclass(frozen=True)
class Edge:
    lam: float
    discriminant_value: int
    jordan_order: int
    touching: bool = False


@dataclass
class BandStructure:
    bands: list[tuple[float, float]]
    edges: list[Edge]
    lambda_min: float
    lambda_max: float
    resolution: int
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    warnings: list[str] = field(default_factory=list)

    @property
    def gaps(self) -> list[tuple[float, float]]:
        return [(a[1], b[0]) for a, b in zip(self.bands, self.bands[1:])]


def _scan(op: OperatorSpec, grid: np.ndarray, tol: float, threads: int) -> np.ndarray:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(lambda x: _real_discriminant(op, x, tol), grid)))
    return np.array([_real_discriminant(op, x, tol) for x in grid])


def _edge_at(op: OperatorSpec, lam: float, target: int, tol: float, touching: bool) -> Edge:
    U = monodromy(op, lam, min(tol, EDGE_INTEGRATION_TOL)).monodromy
    return Edge(lam=float(lam), discriminant_value=target,
                jordan_order=classify_multiplicators(U).l, touching=touching)


def band_structure(spec, lambda_min: float, lambda_max: float, resolution: int = 512,
                   tol: float = DEFAULT_TOL, threads: int = 1) -> BandStructure:
    """Bands {lam real : |Delta(lam)| <= 2} on [lambda_min, lambda_max].

    Crossings of Delta = +-2 between grid points are refined with Brent's
    method.  Local extrema of Delta near +-2 are refined as well: an
    extremum that touches +-2 is a closed gap (recorded as a touching edge),
    one that overshoots hides two edges in one cell.  Edges are refined
    and classified at integrator tolerance ``min(tol, 1e-13)``.
    """
    if not lambda_min < lambda_max:
        raise ValueError("need lambda_min < lambda_max")
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    op = _op(spec)
    grid = np.linspace(lambda_min, lambda_max, resolution)
    vals = _scan(op, grid, tol, threads)
    f = lambda x: _real_discriminant(op, x, tol)  # noqa: E731
    edge_tol = min(tol, EDGE_INTEGRATION_TOL)
    notes: list[str] = []

    crossings: list[Edge] = []
    touchings: list[Edge] = []

    def refine_root(a, b, target):
        g = lambda x: _real_discriminant(op, x, edge_tol) - target  # noqa: E731
        ga, gb = g(a), g(b)
        if ga == 0.0:
            return a
        if gb == 0.0:
            return b
        if ga * gb > 0.0:
            # the bracket only changed sign at the scan tolerance
            g = lambda x: f(x) - target  # noqa: E731
        return brentq(g, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)

    for target in (2, -2):
        g = vals - target
        for i in range(resolution - 1):
            if g[i] == 0.0 and 0 < i and np.sign(g[i - 1]) != np.sign(g[i + 1]):
                crossings.append(_edge_at(op, grid[i], target, tol, False))
            elif g[i] * g[i + 1] < 0.0:
                crossings.append(_edge_at(op, refine_root(grid[i], grid[i + 1], target), target, tol, False))

    for i in range(1, resolution - 1):
        left, mid, right = vals[i - 1], vals[i], vals[i + 1]
        if mid >= left and mid >= right and mid <= 2.0 and left <= 2.0 and right <= 2.0:
            target, sign = 2, 1.0
        elif mid <= left and mid <= right and mid >= -2.0 and left >= -2.0 and right >= -2.0:
            target, sign = -2, -1.0
        else:
            continue
        if abs(mid - target) > 0.5:
            continue
        opt = minimize_scalar(lambda x: -sign * f(x), bounds=(grid[i - 1], grid[i + 1]),
                              method="bounded", options={"xatol": 1e-12})
        x_ext, d_ext = float(opt.x), -float(opt.fun) * sign
        excess = sign * (d_ext - target)
        if abs(excess) <= TOUCH_TOL:
            touchings.append(_edge_at(op, x_ext, target, tol, True))
        elif excess > 0.0:
            msg = f"two band edges between lambda={grid[i - 1]:.6g} and {grid[i + 1]:.6g}; increase resolution"
            warnings.warn(msg, ResolutionTooCoarse, stacklevel=2)
            notes.append(msg)
            crossings.append(_edge_at(op, refine_root(grid[i - 1], x_ext, target), target, tol, False))
            crossings.append(_edge_at(op, refine_root(x_ext, grid[i + 1], target), target, tol, False))

    crossings.sort(key=lambda e: e.lam)
    bands = []
    inside = abs(vals[0]) <= 2.0
    start = lambda_min if inside else None
    for e in crossings:
        if inside:
            bands.append((start, e.lam))
            inside = False
        else:
            start = e.lam
            inside = True
    if inside:
        bands.append((start, lambda_max))
    edges = sorted(crossings + touchings, key=lambda e: e.lam)
    return BandStructure(bands=bands, edges=edges, lambda_min=lambda_min, lambda_max=lambda_max,
                         resolution=resolution, grid=grid, values=vals, warnings=notes)


class HillPointKind(str, enum.Enum):
    INTERIOR = "Interior"
    EDGE = "Edge"
    EDGE_DEGENERATE = "EdgeDegenerate"
    OUTSIDE = "OutsideSpectrum"


@dataclass(frozen=True)
class HillPoint:
    kind: HillPointKind
    l: int
    discriminant: float
    distance: float

    @property
    def required_delta(self) -> float | None:
        """Decay exponent must strictly exceed this for absence of eigenvalues."""
        return None if self.kind is HillPointKind.OUTSIDE else float(self.l)


def classify_hill_point(spec, lam: float, tol: float = DEFAULT_TOL,
                        edge_band_eps: float = DEFAULT_EDGE_BAND_EPS) -> HillPoint:
    """Interior (l=1), Edge (two-fold multiplicator, l=2), EdgeDegenerate (closed gap, l=1) or outside.

    ``distance`` is ``||Delta| - 2|``.
    """
    op = _op(spec)
    mat = monodromy(op, float(lam), tol)
    U = mat.monodromy
    d = complex(np.trace(U))
    if abs(d.imag) > 1e-9 * max(1.0, abs(d.real)):
        raise ArithmeticError(f"discriminant is not real at real lambda={lam}: {d}")
    d = d.real
    dist = abs(abs(d) - 2.0)
    if abs(d) < 2.0 - edge_band_eps:
        return HillPoint(HillPointKind.INTERIOR, 1, d, dist)
    if abs(d) > 2.0 + edge_band_eps:
        return HillPoint(HillPointKind.OUTSIDE, 0, d, dist)
    # with det U = 1, N = U -+ I has sv_1 * sv_2 = |Delta -+ 2| up to the
    # determinant error; a Jordan block keeps sv_1 = O(1) while a nearly
    # diagonalizable U has both singular values O(sqrt(|Delta -+ 2|))
    N = U - math.copysign(1.0, d) * np.eye(2)
    floor = dist + mat.liouville_defect
    if np.linalg.norm(N, 2) > 10.0 * math.sqrt(floor):
        return HillPoint(HillPointKind.EDGE, 2, d, dist)
    return HillPoint(HillPointKind.EDGE_DEGENERATE, 1, d, dist)
