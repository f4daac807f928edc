"""Acceptance criteria 1-10.  Each test records one PASS/FAIL line (printed in the terminal summary)."""
import json
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from floquetspec.discretize import hunt_eigenvalues, shooting_embedded
from floquetspec.floquet import (Invertibility, classify_multiplicators, floquet_decomposition,
                                 halfline_invertibility, max_unimodular_jordan_order)
from floquetspec.hill import HillSpec, band_structure, discriminant
from floquetspec.periodic_ode import OperatorSpec, monodromy
from floquetspec.perturbation import PerturbationSpec, Verdict, certify_absence
from floquetspec.resolvent import (RhsFunction, apply_resolvent, bump, decompose_resolvent_kernel,
                                   weighted_R_bound_check)

from helpers import random_lambda, random_operator

PI = np.pi
HUNT_WINDOW = (0.5, 3.0, -0.5, 0.5)


def test_criterion_01_free_discriminant(acceptance):
    spec = HillSpec.from_string("0")
    start = time.perf_counter()
    lams = np.linspace(-5.0, 100.0, 512)
    got = np.array([discriminant(spec, x).real for x in lams])
    secs = time.perf_counter() - start
    exact = np.where(lams >= 0, 2 * np.cos(np.sqrt(np.abs(lams))), 2 * np.cosh(np.sqrt(np.abs(lams))))
    err = float(np.max(np.abs(got - exact)))
    acceptance(1, err <= 1e-8 and secs <= 30, f"max |Delta - closed form| = {err:.2e} (<= 1e-8), {secs:.1f} s")


def test_criterion_02_liouville(acceptance):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for case in range(200):
        n = 1 + case % 4
        spec = random_operator(rng, n)
        lam = random_lambda(rng, n)
        worst = max(worst, monodromy(spec, lam).liouville_defect)
    secs = time.perf_counter() - start
    acceptance(2, worst <= 1e-7 and secs <= 60,
               f"max |det U(T) - exp(int tr A)| = {worst:.2e} over 200 cases (<= 1e-7), {secs:.1f} s")


def test_criterion_03_jordan_orders(acceptance):
    spec = OperatorSpec.hill("0")
    ls = {}
    for lam in (0.0, PI ** 2 / 4, -1.0):
        ls[lam] = max_unimodular_jordan_order(monodromy(spec, lam).monodromy)
    inv = halfline_invertibility(classify_multiplicators(monodromy(spec, -1.0).monodromy))
    ok = ls[0.0] == 2 and ls[PI ** 2 / 4] == 1 and ls[-1.0] == 0 and inv is Invertibility.NO_INVERSE
    acceptance(3, ok, f"l(0) = {ls[0.0]}, l(pi^2/4) = {ls[PI ** 2 / 4]}, l(-1) = {ls[-1.0]} ({inv.value})")


def _oracle_delta(c):
    def rhs(t, y):
        q = c * np.cos(2 * PI * t)
        return [y[1], (q - lam_) * y[0], y[3], (q - lam_) * y[2]]

    def delta(lam):
        nonlocal lam_
        lam_ = lam
        sol = solve_ivp(rhs, (0.0, 1.0), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=1e-13, atol=1e-14)
        y = sol.y[:, -1]
        return y[0] + y[3]

    lam_ = 0.0
    return delta


def test_criterion_04_band_edges(acceptance):
    worst, min_gap = 0.0, np.inf
    for c in (0.5, 1.0, 2.0):
        spec = HillSpec.from_string(f"{c}*cos(2*pi*t)")
        bs = band_structure(spec, -3.0, 30.0, 256)
        edges = [e.lam for e in bs.edges[:3]]
        # independent oracle: 10x finer scan, sign changes of Delta -+ 2, refined on a separate integrator
        grid = np.linspace(-3.0, 30.0, 2560)
        vals = np.array([discriminant(spec, x).real for x in grid])
        delta = _oracle_delta(c)
        oracle = []
        for target in (2.0, -2.0):
            f = vals - target
            for i in np.nonzero(np.sign(f[:-1]) != np.sign(f[1:]))[0]:
                oracle.append(brentq(lambda x: delta(x) - target, grid[i], grid[i + 1], xtol=1e-13))
        oracle = sorted(oracle)[:3]
        worst = max(worst, float(np.max(np.abs(np.array(edges) - np.array(oracle)))))
        min_gap = min(min_gap, min(b - a for a, b in bs.gaps))
    acceptance(4, worst <= 1e-6 and min_gap > 0,
               f"max edge deviation from 10x oracle = {worst:.2e} (<= 1e-6), narrowest gap {min_gap:.3f} > 0")


def test_criterion_05_floquet_periodicity(acceptance, configs_dir):
    rng = np.random.default_rng(5)
    worst = 0.0
    for name in ("free_hill", "cos_hill"):
        spec = OperatorSpec.from_dict(json.loads((configs_dir / f"{name}.json").read_text()))
        for _ in range(50):
            lam = complex(rng.uniform(-5.0, 60.0), rng.uniform(-3.0, 3.0))
            fd = floquet_decomposition(spec, lam, np.linspace(0.0, spec.period, 5))
            worst = max(worst, float(np.linalg.norm(fd.F_period - np.eye(spec.n))))
    acceptance(5, worst <= 1e-6, f"max ||F(T) - I|| = {worst:.2e} over 2 operators x 50 lambda (<= 1e-6)")


def test_criterion_06_kernel_reconstruction(acceptance):
    rng = np.random.default_rng(6)
    cases = [(OperatorSpec.hill("0"), PI ** 2 / 4), (OperatorSpec.hill("0"), 0.0),
             (OperatorSpec.from_strings(["0", "1"]), 1j)]
    worst = []
    for spec, lam in cases:
        dec = decompose_resolvent_kernel(spec, lam)
        e = 0.0
        for _ in range(100):
            t, s = np.sort(rng.choice(dec.ts[:-1], 2) + spec.period * rng.integers(0, 4, 2))
            e = max(e, float(np.max(np.abs(dec.reconstruct(t, s) - dec.direct(t, s)))))
        worst.append(e)
    acceptance(6, max(worst) <= 1e-6,
               "max reconstruction error (interior, edge, n = 1) = " + ", ".join(f"{w:.1e}" for w in worst))


def test_criterion_07_resolvent_residual(acceptance):
    spec = OperatorSpec.hill("0")
    lam = PI ** 2 / 4
    h = 1.0 / 512
    f1, f2 = bump(1.0, 3.0), bump(2.0, 5.0, -0.7)
    s1 = apply_resolvent(spec, lam, RhsFunction.from_callable(f1, 12.0, h, 6.0))
    s2 = apply_resolvent(spec, lam, RhsFunction.from_callable(f2, 12.0, h, 6.0))
    s3 = apply_resolvent(spec, lam, RhsFunction.from_callable(lambda t: f1(t) + 2 * f2(t), 12.0, h, 6.0))
    lin = float(np.max(np.abs(s3.x - (s1.x + 2 * s2.x))))
    acceptance(7, s1.residual_max <= 1e-4 and lin <= 1e-9,
               f"residual {s1.residual_max:.2e} (<= 1e-4), linearity defect {lin:.1e} (<= 1e-9)")


def test_criterion_08_weighted_bound(acceptance):
    grid = np.linspace(0.0, 60.0, 60 * 32 + 1)
    violations, worst_rel = 0, 0.0
    for re in (0.5, 1.0, 2.0):
        for tau in (0.0, 1.0, 2.0):
            rep = weighted_R_bound_check(complex(re, 1.0), tau, grid, trials=100, seed=8)
            violations += rep.violations
            worst_rel = max(worst_rel, rep.max_ratio / rep.bound)
    for tau in (0.0, 1.0, 2.0):
        rep = weighted_R_bound_check(1j, tau, grid, trials=100, seed=8)
        violations += rep.violations
        worst_rel = max(worst_rel, rep.max_ratio / rep.bound)
    acceptance(8, violations == 0,
               f"{violations} violations in 1200 trials (weighted and shifted), max ratio / bound = {worst_rel:.3f}")


def test_criterion_09_certification(acceptance):
    cos_hill = OperatorSpec.hill("cos(2*pi*t)")
    pert = PerturbationSpec.from_strings(["(1+t)^(-2)", "0", "0"], delta=2.0)
    interior = certify_absence(cos_hill, pert, 3.0)
    edge_lam = band_structure(HillSpec.from_operator(cos_hill), -2.0, 2.0, 256).edges[0].lam
    edge = certify_absence(cos_hill, pert, edge_lam, tol=1e-13)
    below = certify_absence(OperatorSpec.hill("0"), PerturbationSpec.zero(2, delta=2.0), -1.0)
    ok = (interior.verdict is Verdict.CERTIFIED and edge.verdict is Verdict.INCONCLUSIVE and edge.l == 2
          and below.verdict is Verdict.INCONCLUSIVE and below.reason == "multiplicator hypothesis not met")
    acceptance(9, ok, f"interior {interior.verdict.value}, edge {edge.verdict.value} (l = {edge.l}), "
                      f"lambda = -1 {below.verdict.value} ({below.reason})")


def test_criterion_10_hunt_corroboration(acceptance, configs_dir):
    free = OperatorSpec.from_dict(json.loads((configs_dir / "free_hill.json").read_text()))
    cert = PerturbationSpec.from_dict(json.loads((configs_dir / "decay3.json").read_text()))
    wvn = PerturbationSpec.from_dict(json.loads((configs_dir / "wvn.json").read_text()))
    assert certify_absence(free, cert, 1.0).verdict is Verdict.CERTIFIED
    assert certify_absence(free, wvn, 1.0).verdict is not Verdict.CERTIFIED

    a = hunt_eigenvalues(free, cert, HUNT_WINDOW)
    b = hunt_eigenvalues(free, wvn, HUNT_WINDOW)
    shot = [shooting_embedded(free, wvn, max(0.5, c.lam.real - 0.1), c.lam.real + 0.1) for c in b.genuine]
    agree = [abs(c.lam - e) for c, e in zip(b.genuine, shot)]
    ok = (not a.genuine and a.seconds <= 600 and b.seconds <= 600 and len(b.genuine) >= 1
          and max(agree) <= 1e-3)
    genuine = ", ".join(f"{c.lam.real:.6f}" for c in b.genuine)
    acceptance(10, ok, f"[{a.label}] certified: {len(a.genuine)} Genuine ({a.seconds:.0f} s); "
                       f"violating coefficient: Genuine at {genuine} ({b.seconds:.0f} s), "
                       f"shooting oracle {', '.join(f'{e:.6f}' for e in shot)}, "
                       f"|diff| {max(agree, default=np.inf):.1e} (<= 1e-3)")
