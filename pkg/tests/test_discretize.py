import json

import numpy as np
import pytest

from floquetspec.discretize import (Classification, MemoryBudgetExceeded, assemble_operator, hunt_eigenvalues,
                                    shoot, shooting_bound_state, shooting_embedded)
from floquetspec.fd import fornberg_weights
from floquetspec.perturbation import PerturbationSpec
from floquetspec.periodic_ode import OperatorSpec, SpecError

from helpers import WVN_POTENTIAL

PI = np.pi


def _sorted_real(M):
    return np.sort(np.linalg.eigvals(M).real)


def test_fornberg_weights_reproduce_known_stencils():
    # one row per derivative order 0..m
    assert np.allclose(fornberg_weights(0.0, [-1, 0, 1], 2)[2], [1, -2, 1])
    assert np.allclose(fornberg_weights(0.0, [-2, -1, 0, 1, 2], 1)[1], [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])


def test_dirichlet_free_hill(free_hill):
    g = assemble_operator(free_hill, None, 10.0, 1.0 / 64)
    assert g.N == 640 and g.size == 639
    ev = _sorted_real(g.matrix)[:3]
    exact = (np.arange(1, 4) * PI / 10) ** 2
    assert np.max(np.abs(ev - exact) / exact) <= 1e-3


def test_sech_well_bound_state(free_hill):
    # reflectionless well centred away from the Dirichlet end
    pert = PerturbationSpec.from_strings(["-2*sech(t-10)^2", "0", "0"], delta=2.0)
    g = assemble_operator(free_hill, pert, 20.0, 1.0 / 64)
    low = _sorted_real(g.matrix)[0]
    oracle = shooting_bound_state(free_hill, pert, -1.5, -0.5, 20.0)
    assert abs(oracle + 1.0) <= 1e-6
    assert abs(low - oracle) <= 1e-5


def test_subdiagonal_kernel_block_is_triangular(free_hill):
    pert = PerturbationSpec.from_strings(["0", "0", "0"], ["0.1*exp(-(s-t))", "0", "0"],
                                         zero_below_diagonal=True)
    g = assemble_operator(free_hill, pert, 4.0, 1.0 / 32)
    K = g.kernel_matrix
    assert K is not None
    assert np.array_equal(np.tril(K, -1), np.zeros_like(K))
    assert np.all(np.diag(K) > 0)


def test_interior_rows_are_symmetric(cos_hill):
    g = assemble_operator(cos_hill, None, 8.0, 1.0 / 32)
    M = g.matrix
    assert np.isrealobj(M)
    w = 4
    inner = M[w:-w, w:-w]
    assert np.max(np.abs(inner - inner.T)) <= 1e-12


def test_grid_convergence(cos_hill):
    fine = _sorted_real(assemble_operator(cos_hill, None, 4.0, 1.0 / 256).matrix)[:4]
    errs = []
    for h in (1.0 / 32, 1.0 / 64):
        ev = _sorted_real(assemble_operator(cos_hill, None, 4.0, h).matrix)[:4]
        errs.append(np.max(np.abs(ev - fine)))
    C = errs[1] / (1.0 / 64) ** 2
    assert errs[1] < errs[0] and C <= 1.0


def test_assembly_validation(free_hill, cos_hill):
    with pytest.raises(SpecError, match="resolve"):
        assemble_operator(cos_hill, None, 4.0, 1.0 / 16)
    with pytest.raises(SpecError, match="multiple of the period"):
        assemble_operator(cos_hill, None, 4.5, 1.0 / 32)
    with pytest.raises(MemoryBudgetExceeded):
        assemble_operator(free_hill, None, 200.0, 1.0 / 64)
    with pytest.raises(SpecError, match="order"):
        assemble_operator(free_hill, PerturbationSpec.zero(1), 4.0, 1.0 / 32)


def test_first_order_derivative_terms(free_hill):
    # -u'' + c D u with u = exp(i c t / 2) v becomes -v'' - c^2 / 4 v
    c = 0.5
    pert = PerturbationSpec.from_strings(["0", str(c), "0"], delta=2.0)
    g = assemble_operator(free_hill, pert, 4.0, 1.0 / 64)
    assert np.iscomplexobj(g.matrix)
    ev = np.linalg.eigvals(g.matrix)
    ev = ev[np.argsort(ev.real)][:3]
    exact = (np.arange(1, 4) * PI / 4) ** 2 - c ** 2 / 4
    assert np.max(np.abs(ev - exact)) <= 1e-4


# ---------------------------------------------------------------------- hunts


SMALL = (20.0, 30.0, 40.0)


def test_hunt_validation(free_hill):
    with pytest.raises(ValueError):
        hunt_eigenvalues(free_hill, None, (1, 2, -1, 1), lengths=(20.0, 40.0))
    with pytest.raises(ValueError):
        hunt_eigenvalues(free_hill, None, (1, 2, -1, 1), lengths=(40.0, 20.0, 80.0))


def test_unperturbed_band_has_no_genuine_candidates(cos_hill):
    rep = hunt_eigenvalues(cos_hill, None, (1.0, 8.0, -0.5, 0.5), lengths=SMALL, h=1.0 / 32)
    assert rep.candidates and not rep.genuine
    assert "not a proof" in rep.label


def test_certified_perturbation_small_hunt(free_hill, configs_dir):
    pert = PerturbationSpec.from_dict(json.loads((configs_dir / "decay3.json").read_text()))
    rep = hunt_eigenvalues(free_hill, pert, (0.5, 9.0, -0.5, 0.5), lengths=SMALL, h=1.0 / 32)
    assert not rep.genuine


def test_wigner_von_neumann_small_hunt(free_hill):
    pert = PerturbationSpec.from_strings([WVN_POTENTIAL, "0", "0"], delta=1.0)
    rep = hunt_eigenvalues(free_hill, pert, (0.9, 1.1, -0.05, 0.05), lengths=SMALL, h=1.0 / 32)
    (cand,) = rep.genuine
    assert abs(cand.lam - 1.0) <= 1e-4
    # robustness margin: tightening both tolerances by 2x keeps the verdict
    tight = hunt_eigenvalues(free_hill, pert, (0.9, 1.1, -0.05, 0.05), lengths=SMALL, h=1.0 / 32,
                             loc_tol=5e-4, drift_tol=5e-4)
    assert len(tight.genuine) == 1


def test_hunt_threads_agree(cos_hill):
    a = hunt_eigenvalues(cos_hill, None, (1.0, 4.0, -0.5, 0.5), lengths=(8.0, 10.0, 12.0), h=1.0 / 32)
    b = hunt_eigenvalues(cos_hill, None, (1.0, 4.0, -0.5, 0.5), lengths=(8.0, 10.0, 12.0), h=1.0 / 32,
                         threads=3)
    assert [c.lam for c in a.candidates] == [c.lam for c in b.candidates]
    assert all(c.classification in set(Classification) for c in a.candidates)


# -------------------------------------------------------------------- shooting


def test_shooting_free_dirichlet(free_hill):
    assert shooting_bound_state(free_hill, None, 0.05, 0.15, 10.0) == pytest.approx((PI / 10) ** 2, rel=1e-10)
    u, du = shoot(free_hill, None, 4.0, 1.0)
    assert u == pytest.approx(np.sin(2.0) / 2, abs=1e-9) and du == pytest.approx(np.cos(2.0), abs=1e-9)


def test_shooting_embedded_wigner_von_neumann(free_hill):
    pert = PerturbationSpec.from_strings([WVN_POTENTIAL, "0", "0"], delta=1.0)
    assert abs(shooting_embedded(free_hill, pert, 0.8, 1.2) - 1.0) <= 1e-4


def test_shooting_rejects_non_hill(free_hill):
    with pytest.raises(SpecError):
        shoot(OperatorSpec.from_strings(["0", "1"]), None, 1.0, 1.0)
    kern = PerturbationSpec.from_strings(["0", "0", "0"], ["exp(t-s)", "0", "0"], zero_below_diagonal=True)
    with pytest.raises(SpecError):
        shoot(free_hill, kern, 1.0, 1.0)
    with pytest.raises(ValueError):
        shooting_embedded(free_hill, None, -1.0, 1.0)
