import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floquetspec import linalg
from floquetspec.floquet import (Invertibility, Location, classify_multiplicators, floquet_decomposition,
                                 halfline_invertibility, max_unimodular_jordan_order, multiplicators_at,
                                 wholeline_spectrum_membership)
from floquetspec.hill import band_structure
from floquetspec.periodic_ode import OperatorSpec, monodromy

from helpers import random_lambda, random_operator

PI = np.pi


def _free(lam):
    return monodromy(OperatorSpec.hill("0"), lam).monodromy


def test_classify_shear():
    ms = classify_multiplicators(np.array([[1.0, 1.0], [0.0, 1.0]]))
    (m,) = ms.entries
    assert m.rho == pytest.approx(1.0)
    assert (m.algebraic_mult, m.geometric_mult, m.block_orders) == (2, 1, (2,))
    assert m.location is Location.ON_CIRCLE
    assert ms.l == 2 and ms.n == 2


def test_classify_quarter_band():
    ms = classify_multiplicators(_free(PI ** 2 / 4))
    rhos = sorted((m.rho for m in ms.entries), key=lambda z: z.imag)
    assert np.allclose(rhos, [-1j, 1j], atol=1e-9)
    assert all(m.block_orders == (1,) and m.location is Location.ON_CIRCLE for m in ms.entries)
    assert ms.l == 1


def test_classify_outside_band():
    ms = classify_multiplicators(_free(-1.0))
    locs = {m.location: m.rho for m in ms.entries}
    assert locs[Location.OUTSIDE] == pytest.approx(np.e, rel=1e-9)
    assert locs[Location.INSIDE] == pytest.approx(1 / np.e, rel=1e-9)
    assert ms.l == 0


@pytest.mark.parametrize("lam, l", [(0.0, 2), (PI ** 2 / 4, 1), (-1.0, 0), (PI ** 2, 1), (4 * PI ** 2, 1)])
def test_max_unimodular_order_free_hill(lam, l):
    assert max_unimodular_jordan_order(_free(lam)) == l


def test_circle_boundary_is_deterministic():
    eps = 1e-6
    ms = classify_multiplicators(np.diag([1.0 + 0.9 * eps, 1.0 / (1.0 + 0.9 * eps)]), epsilon_circle=eps)
    assert all(m.location is Location.ON_CIRCLE for m in ms.entries)
    ms = classify_multiplicators(np.diag([1.0 + 2 * eps, 1.0 / (1.0 + 2 * eps)]), epsilon_circle=eps)
    assert {m.location for m in ms.entries} == {Location.INSIDE, Location.OUTSIDE}
    assert all(m.circle_distance == pytest.approx(2 * eps, rel=1e-3) for m in ms.entries)


def test_halfline_invertibility():
    assert halfline_invertibility(classify_multiplicators(_free(-1.0))) is Invertibility.NO_INVERSE
    assert halfline_invertibility(classify_multiplicators(_free(PI ** 2 / 4))) is Invertibility.INVERSE_EXISTS
    assert halfline_invertibility(classify_multiplicators(_free(0.0))) is Invertibility.INVERSE_EXISTS


def test_wholeline_membership():
    assert wholeline_spectrum_membership(classify_multiplicators(_free(4.0)))
    assert not wholeline_spectrum_membership(classify_multiplicators(_free(-1.0)))
    U = _free(2.0 + 3.0j)
    ms = classify_multiplicators(U)
    assert not wholeline_spectrum_membership(ms)
    assert abs(np.prod([m.rho for m in ms.entries]) - 1.0) <= 1e-8
    assert all(m.location is not Location.ON_CIRCLE for m in ms.entries)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.5, 2.0), st.floats(-5.0, 60.0))
def test_hill_pairing(c, lam):
    spec = OperatorSpec.hill(f"({c})*cos(2*pi*t)")
    _, ms = multiplicators_at(spec, lam)
    rhos = [m.rho for m in ms.entries for _ in range(m.algebraic_mult)]
    assert abs(rhos[0] * rhos[1] - 1.0) <= 1e-8
    both_real = all(abs(r.imag) <= 1e-6 for r in rhos)
    conj_unimodular = abs(rhos[0] - np.conj(rhos[1])) <= 1e-6 and all(abs(abs(r) - 1) <= 1e-6 for r in rhos)
    assert both_real or conj_unimodular


def test_l_is_invariant_under_coordinate_similarity():
    S = np.diag([1.0, 1j])
    for lam in (0.0, PI ** 2 / 4, -1.0, PI ** 2):
        U = _free(lam)
        assert max_unimodular_jordan_order(S @ U @ np.linalg.inv(S)) == max_unimodular_jordan_order(U)


def test_l_transition_across_gapped_edge():
    spec = OperatorSpec.hill("cos(2*pi*t)")
    bs = band_structure(spec, -1.0, 30.0, 256)
    for edge in bs.edges[:4]:
        assert edge.jordan_order == 2
        inside = [lam for lam in (edge.lam - 1e-3, edge.lam + 1e-3)
                  if any(a < lam < b for a, b in bs.bands)]
        outside = [lam for lam in (edge.lam - 1e-3, edge.lam + 1e-3) if lam not in inside]
        assert len(inside) == len(outside) == 1
        assert max_unimodular_jordan_order(monodromy(spec, inside[0]).monodromy) == 1
        assert max_unimodular_jordan_order(monodromy(spec, edge.lam).monodromy) == 2
        assert max_unimodular_jordan_order(monodromy(spec, outside[0]).monodromy) == 0


def test_decomposition_free_hill_branch():
    fd = floquet_decomposition(OperatorSpec.hill("0"), PI ** 2)
    assert np.allclose(fd.gamma, 1j * PI * np.eye(2), atol=1e-7)
    assert np.linalg.norm(fd.F_period - np.eye(2)) <= 1e-6
    assert np.allclose(fd.F_samples[0], np.eye(2), atol=0)


def test_decomposition_hyperbolic():
    fd = floquet_decomposition(OperatorSpec.hill("0"), -1.0)
    assert np.allclose(np.sort(np.linalg.eigvals(fd.gamma).real), [-1.0, 1.0], atol=1e-9)
    assert np.allclose(linalg.matrix_exp(fd.gamma), fd.monodromy, atol=1e-8)


def test_decomposition_cos_hill():
    fd = floquet_decomposition(OperatorSpec.hill("cos(2*pi*t)"), 5.0)
    assert np.linalg.norm(fd.F_period - np.eye(2)) <= 1e-6
    # F is periodic: F(t) == U(t) exp(-t Gamma) at the sampled end point equals F(0)
    assert np.linalg.norm(fd.F_samples[-1] - fd.F_samples[0]) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_floquet_factor_periodic_for_random_operators(n, seed):
    rng = np.random.default_rng(seed)
    spec = random_operator(rng, n)
    lam = random_lambda(rng, n)
    fd = floquet_decomposition(spec, lam, np.linspace(0, 1, 9))
    assert np.linalg.norm(fd.F_period - np.eye(n)) <= 1e-6
    assert np.linalg.norm(fd.F_samples[-1] - np.eye(n)) <= 1e-6


def test_branch_warning_is_recorded():
    fd = floquet_decomposition(OperatorSpec.hill("0"), 4.0 * PI ** 2 + 1e-9 * 0)
    assert fd.warnings == [] or all("negative real axis" in w for w in fd.warnings)
    fd = floquet_decomposition(OperatorSpec.hill("0"), PI ** 2)
    assert any("negative real axis" in w for w in fd.warnings)


def test_F_lookup_on_samples_only():
    fd = floquet_decomposition(OperatorSpec.hill("0"), 3.0, np.linspace(0, 1, 5))
    assert np.allclose(fd.F(1.25), fd.F_samples[1])
    with pytest.raises(ValueError):
        fd.F(0.1)
