import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from floquetspec import linalg

SHEAR = np.array([[1.0, 1.0], [0.0, 1.0]])
ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _clusters(M, digits=10):
    res = linalg.eig(M)
    out = [(complex(np.round(v, digits)), int(m)) for v, m in zip(res.eigenvalues, res.multiplicities)]
    return sorted(out, key=lambda e: (e[0].real, e[0].imag))


def test_eig_examples():
    assert _clusters(np.eye(2)) == [(1 + 0j, 2)]
    assert _clusters(SHEAR) == [(1 + 0j, 2)]
    assert _clusters(ROT) == [(-1j, 1), (1j, 1)]


def test_eig_multiplicities_sum_to_n_and_eigenpairs_are_accurate():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    res = linalg.eig(M, vectors=True)
    assert res.multiplicities.sum() == 6
    for mu, v in zip(res.raw, res.vectors.T):
        assert np.linalg.norm(M @ v - mu * v) <= 1e-10 * np.linalg.norm(M, 2)


def test_eig_merges_within_radius_only():
    D = np.diag([1.0, 1.0 + 1e-9, 2.0])
    assert _clusters(D, digits=8) == [(1 + 0j, 2), (2 + 0j, 1)]
    D = np.diag([1.0, 1.1, 2.0])
    assert len(linalg.eig(D).eigenvalues) == 3


def test_eig_non_finite_input_raises():
    with pytest.raises(ValueError):
        linalg.eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_matrix_exp_examples():
    assert np.allclose(linalg.matrix_exp(np.zeros((3, 3))), np.eye(3), atol=0)
    assert np.allclose(linalg.matrix_exp(np.diag([1.0, -1.0])), np.diag([np.e, 1 / np.e]), rtol=1e-14)
    assert np.allclose(linalg.matrix_exp(np.array([[0.0, 1.0], [0.0, 0.0]])), SHEAR, atol=1e-15)


def test_matrix_exp_overflow():
    with pytest.raises(linalg.MatrixOverflow):
        linalg.matrix_exp(np.diag([1e4, 0.0]))


def test_matrix_log_examples():
    assert np.allclose(linalg.matrix_log(np.eye(2)), 0.0, atol=1e-15)
    assert np.allclose(linalg.matrix_log(np.diag([np.e, 1 / np.e])), np.diag([1.0, -1.0]), atol=1e-14)
    with pytest.warns(linalg.BranchAmbiguity):
        Y = linalg.matrix_log(-np.eye(2))
    assert np.allclose(Y, 1j * np.pi * np.eye(2), atol=1e-15)


def test_matrix_log_keeps_a_split_negative_cluster_on_one_branch():
    M = -np.eye(2) + np.array([[0.0, 1e-11], [-1e-11, 0.0]])
    with pytest.warns(linalg.BranchAmbiguity):
        Y = linalg.matrix_log(M)
    assert np.allclose(Y, 1j * np.pi * np.eye(2), atol=1e-9)
    assert np.allclose(linalg.matrix_exp(Y), M, atol=1e-14)


def test_matrix_log_of_jordan_block_uses_finite_series():
    rho = 0.3 + 0.4j
    M = np.array([[rho, 1.0], [0.0, rho]])
    expect = np.array([[np.log(rho), 1.0 / rho], [0.0, np.log(rho)]])
    assert np.allclose(linalg.matrix_log(M), expect, atol=1e-13)


def test_matrix_log_singular():
    with pytest.raises(linalg.SingularMatrix):
        linalg.matrix_log(np.array([[1.0, 2.0], [2.0, 4.0]]))


def _well_conditioned(rng, n, limit=50.0):
    while True:
        S = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        if np.linalg.cond(S) < limit:
            return S


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_exp_log_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    S = _well_conditioned(rng, n)
    # eigenvalues in a sector away from the negative real axis
    ev = rng.uniform(0.2, 3.0, n) * np.exp(1j * rng.uniform(-2.5, 2.5, n))
    M = S @ np.diag(ev) @ np.linalg.inv(S)
    err = np.linalg.norm(linalg.matrix_exp(linalg.matrix_log(M)) - M) / np.linalg.norm(M)
    assert err <= 1e-8


def test_exp_negative_is_inverse():
    rng = np.random.default_rng(5)
    for n in range(2, 7):
        M = 0.5 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
        assert np.linalg.norm(linalg.matrix_exp(M) @ linalg.matrix_exp(-M) - np.eye(n)) <= 1e-10 * n


def test_jordan_examples():
    js = linalg.jordan_block_orders(SHEAR, 1.0)
    assert js.block_orders == (2,) and js.geometric_mult == 1 and js.algebraic_mult == 2
    js = linalg.jordan_block_orders(np.eye(2), 1.0)
    assert js.block_orders == (1, 1) and js.geometric_mult == 2
    assert linalg.jordan_block_orders(np.diag([2.0, 3.0]), 2.0).block_orders == (1,)


def test_not_an_eigenvalue():
    with pytest.raises(linalg.NotAnEigenvalue):
        linalg.jordan_block_orders(np.diag([2.0, 3.0]), 2.5)


def _jordan_matrix(blocks):
    return scipy.linalg.block_diag(*[mu * np.eye(p) + np.eye(p, k=1) for mu, p in blocks])


block_lists = st.lists(
    st.tuples(st.sampled_from([1.0, -1.0, 2.0, 1j, 0.5 - 0.5j]), st.integers(1, 4)),
    min_size=1, max_size=3,
).filter(lambda bl: sum(p for _, p in bl) <= 6)


@settings(max_examples=100, deadline=None)
@given(block_lists, st.integers(0, 2**32 - 1))
def test_jordan_orders_recovered_after_similarity(blocks, seed):
    rng = np.random.default_rng(seed)
    J = _jordan_matrix(blocks)
    n = J.shape[0]
    S = _well_conditioned(rng, n, limit=20.0)
    M = S @ J @ np.linalg.inv(S)
    res = linalg.eig(M)
    found = {}
    for mu, size, spread in zip(res.eigenvalues, res.multiplicities, res.spreads):
        js = linalg.jordan_block_orders(M, mu, spread=spread)
        key = min({b[0] for b in blocks}, key=lambda v: abs(v - mu))
        assert abs(key - mu) < 1e-3
        found[key] = (js.block_orders, int(size))
    expect = {}
    for mu, p in blocks:
        expect.setdefault(mu, []).append(p)
    assert set(found) == set(expect)
    for mu, orders in expect.items():
        assert found[mu][0] == tuple(sorted(orders, reverse=True))
        assert found[mu][1] == sum(orders)


def test_normal_near_pair_is_not_merged():
    # a rotation by 1e-5 has eigenvalues 2e-5 apart; it is normal, so no
    # perturbation at the rank tolerance can coalesce them
    c = 1e-5
    M = np.array([[np.cos(c), np.sin(c)], [-np.sin(c), np.cos(c)]])
    assert list(linalg.eig(M).multiplicities) == [1, 1]


def test_near_scalar_cluster_is_not_a_jordan_block():
    M = np.array([[1.0, 1e-7], [-1e-7, 1.0]])
    res = linalg.eig(M)
    assert list(res.multiplicities) == [2]
    js = linalg.jordan_block_orders(M, res.eigenvalues[0], spread=res.spreads[0])
    assert js.block_orders == (1, 1)


def test_noisy_jordan_block_is_merged():
    M = SHEAR + np.array([[0.0, 0.0], [1e-10, 0.0]])
    res = linalg.eig(M)
    assert list(res.multiplicities) == [2]
    js = linalg.jordan_block_orders(M, res.eigenvalues[0], spread=res.spreads[0])
    assert js.block_orders == (2,)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_block_triangular_eigenvalues(n1, n2, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n1, n1)) + 1j * rng.normal(size=(n1, n1))
    B = rng.normal(size=(n2, n2)) + 1j * rng.normal(size=(n2, n2))
    C = rng.normal(size=(n1, n2))
    M = np.block([[A, C], [np.zeros((n2, n1)), B]])
    got = np.sort_complex(linalg.eig(M, cluster_radius=0.0, rank_tol=0.0).raw)
    want = np.sort_complex(np.concatenate([np.linalg.eigvals(A), np.linalg.eigvals(B)]))
    assert np.max(np.abs(got - want)) <= 1e-10 * max(1.0, np.abs(want).max())


def test_generalized_eigenspace_is_invariant():
    M = _jordan_matrix([(2.0, 2), (-1.0, 1)])
    V = linalg.generalized_eigenspace(M, 2.0, 2)
    assert V.shape == (3, 2)
    P = V @ V.conj().T
    assert np.allclose(P @ M @ V, M @ V, atol=1e-12)


def test_no_warning_for_well_separated_log():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        linalg.matrix_log(np.diag([2.0, 3.0]))
