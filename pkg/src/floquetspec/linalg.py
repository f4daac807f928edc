"""Small dense complex linear algebra for Floquet analysis.

Eigenvalue clustering, matrix exponential and logarithm, numerical rank and
Jordan block orders from the rank staircase.  Matrices here are n x n with n
the operator order, so everything is dense and direct.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "LinalgError", "ConvergenceFailure", "SingularMatrix", "MatrixOverflow", "NotAnEigenvalue",
    "BranchAmbiguity", "EigResult", "JordanStructure", "default_cluster_radius",
    "eig", "matrix_exp", "matrix_log", "numerical_rank", "jordan_block_orders",
    "generalized_eigenspace",
]

DEFAULT_RANK_TOL = 1e-8
# Candidate range for merging eigenvalues that split off a defective eigenvalue.
DEFECT_SEARCH_RADIUS = 1e-3
# (M - mu)^k entries below (SPREAD_FACTOR * cluster spread)^k carry no Jordan information
SPREAD_FACTOR = 10.0


class LinalgError(ArithmeticError):
    pass


class ConvergenceFailure(LinalgError):
    pass


class SingularMatrix(LinalgError):
    pass


class MatrixOverflow(LinalgError, OverflowError):
    pass


class NotAnEigenvalue(LinalgError):
    pass


class BranchAmbiguity(UserWarning):
    """An eigenvalue sits near the branch cut of the principal logarithm."""


@dataclass
class EigResult:
    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    spreads: np.ndarray
    raw: np.ndarray
    groups: list[list[int]] = field(repr=False)
    vectors: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class JordanStructure:
    eigenvalue: complex
    block_orders: tuple[int, ...]
    algebraic_mult: int
    geometric_mult: int


def _as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def _scale(M: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(M, 2)))


def default_cluster_radius(M) -> float:
    return 1e-6 * _scale(np.asarray(M, dtype=complex))


def numerical_rank(M, threshold: float) -> int:
    """Number of singular values above ``threshold`` (absolute)."""
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv > threshold))


def _rank_sequence(M: np.ndarray, mu: complex, rank_tol: float, spread: float = 0.0) -> list[int]:
    n = M.shape[0]
    scale = _scale(M)
    shifted = M - mu * np.eye(n)
    ranks = [n]
    power = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        power = power @ shifted
        threshold = max(rank_tol * scale ** k, (SPREAD_FACTOR * spread) ** k)
        ranks.append(numerical_rank(power, threshold))
        if ranks[-1] == ranks[-2]:
            ranks.extend([ranks[-1]] * (n - k))
            break
    for k in range(1, len(ranks)):
        ranks[k] = min(ranks[k], ranks[k - 1])
    return ranks


def _orders_from_ranks(ranks: list[int]) -> tuple[int, ...]:
    # blocks of order >= k equals r_{k-1} - r_k
    at_least = [ranks[k - 1] - ranks[k] for k in range(1, len(ranks))] + [0]
    orders: list[int] = []
    for k in range(len(at_least) - 1, 0, -1):
        count = at_least[k - 1] - at_least[k]
        orders.extend([k] * max(count, 0))
    return tuple(sorted(orders, reverse=True))


def jordan_block_orders(M, mu: complex, rank_tol: float = DEFAULT_RANK_TOL,
                        cluster_radius: float | None = None, spread: float = 0.0) -> JordanStructure:
    """Jordan block orders of ``M`` at ``mu`` from the rank staircase.

    rank((M - mu I)^k) is computed by singular-value thresholding at
    ``max(rank_tol * max(1, |M|)^k, (10 * spread)^k)``, where ``spread`` is the
    diameter of the eigenvalue cluster that ``mu`` stands for.  A cluster of
    diameter d that is really a perturbed Jordan block keeps |M - mu| = O(1),
    while a nearly scalar cluster has |M - mu| = O(d).
    """
    M = _as_square(M)
    n = M.shape[0]
    if cluster_radius is None:
        cluster_radius = default_cluster_radius(M)
    sv = np.linalg.svd(M - mu * np.eye(n), compute_uv=False)
    if sv[-1] > cluster_radius:
        raise NotAnEigenvalue(f"{mu!r} is not an eigenvalue (smallest singular value {sv[-1]:.3e})")
    ranks = _rank_sequence(M, mu, rank_tol, spread)
    orders = _orders_from_ranks(ranks)
    if not orders:
        orders = (1,)
    return JordanStructure(
        eigenvalue=complex(mu),
        block_orders=orders,
        algebraic_mult=sum(orders),
        geometric_mult=len(orders),
    )


def _single_linkage(values: np.ndarray, radius: float) -> list[list[int]]:
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: (np.mean(values[g]).real, np.mean(values[g]).imag))


def _diameter(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.max(np.abs(values[:, None] - values[None, :])))


def _looks_defective(M: np.ndarray, raw: np.ndarray, mu: complex, diam: float, rank_tol: float) -> bool:
    # for a normal matrix the singular values of M - mu are the distances
    # |lambda_i - mu|, so the nullity at a threshold equals the number of
    # eigenvalues within it; a perturbed Jordan block has fewer null directions
    n = M.shape[0]
    thr = max(rank_tol * _scale(M), SPREAD_FACTOR * diam)
    sv = np.linalg.svd(M - mu * np.eye(n), compute_uv=False)
    nullity = int(np.sum(sv <= thr))
    return nullity < int(np.sum(np.abs(raw - mu) <= thr))


def eig(M, cluster_radius: float | None = None, rank_tol: float = DEFAULT_RANK_TOL,
        vectors: bool = False) -> EigResult:
    """Eigenvalues of ``M`` with clustering.

    Raw eigenvalues within ``cluster_radius`` are merged into their mean.  A
    defective eigenvalue perturbed by noise eta splits by roughly eta^(1/p),
    far beyond any fixed radius, so groups up to ``DEFECT_SEARCH_RADIUS``
    apart are also merged while the combined cluster of size m satisfies
    (diameter / 2)^m <= rank_tol * max(1, |M|)^m, i.e. while a perturbation
    at the rank tolerance could coalesce it, and M - mean is not nearly
    scalar on the cluster (a normal matrix cannot hide a split that way).
    """
    M = _as_square(M)
    if cluster_radius is None:
        cluster_radius = default_cluster_radius(M)
    try:
        if vectors:
            raw, vecs = scipy.linalg.eig(M)
        else:
            raw, vecs = scipy.linalg.eigvals(M), None
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not np.all(np.isfinite(raw)):
        raise ConvergenceFailure("eigenvalue iteration produced non-finite values")

    groups = _single_linkage(raw, cluster_radius)
    scale = _scale(M)
    wide = DEFECT_SEARCH_RADIUS * scale
    merged = True
    while merged and len(groups) > 1:
        merged = False
        means = [np.mean(raw[g]) for g in groups]
        pairs = sorted(
            (abs(means[i] - means[j]), i, j)
            for i in range(len(groups)) for j in range(i + 1, len(groups))
        )
        for dist, i, j in pairs:
            if dist > wide:
                break
            combined = groups[i] + groups[j]
            m = len(combined)
            diam = _diameter(raw[combined])
            if (diam / 2.0) ** m <= rank_tol * scale ** m and _looks_defective(M, raw, np.mean(raw[combined]), diam, rank_tol):
                groups = [g for k, g in enumerate(groups) if k not in (i, j)] + [sorted(combined)]
                merged = True
                break

    groups.sort(key=lambda g: (np.mean(raw[g]).real, np.mean(raw[g]).imag))
    return EigResult(
        eigenvalues=np.array([np.mean(raw[g]) for g in groups], dtype=complex),
        multiplicities=np.array([len(g) for g in groups], dtype=int),
        spreads=np.array([_diameter(raw[g]) for g in groups]),
        raw=raw,
        groups=groups,
        vectors=vecs,
    )


def matrix_exp(M) -> np.ndarray:
    """exp(M) by scaling and squaring (scipy's Pade-based ``expm``)."""
    M = _as_square(M)
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(M)
    if not np.all(np.isfinite(out)):
        raise MatrixOverflow("matrix exponential overflowed")
    return out


def matrix_log(M, cluster_radius: float | None = None) -> np.ndarray:
    """Principal logarithm: a solution Y of exp(Y) = M with Im(eig) in (-pi, pi].

    Warns :class:`BranchAmbiguity` when an eigenvalue lies within
    ``cluster_radius`` of the negative real axis, where the principal branch
    is not continuous; such eigenvalues all get arg close to +pi.
    """
    M = _as_square(M)
    n = M.shape[0]
    if cluster_radius is None:
        cluster_radius = default_cluster_radius(M)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-14 * max(1.0, sv[0]):
        raise SingularMatrix("matrix logarithm of a (numerically) singular matrix")
    ev = scipy.linalg.eigvals(M)
    near_cut = (ev.real < 0) & (np.abs(ev.imag) <= cluster_radius)
    if np.any(near_cut):
        warnings.warn(
            f"eigenvalue(s) {ev[near_cut]} near the negative real axis; principal log branch chosen",
            BranchAmbiguity, stacklevel=2,
        )
    if np.allclose(M, M[0, 0] * np.eye(n), rtol=0.0, atol=0.0):
        # exact scalar matrices: avoid any drift in the branch of log(-1)
        return np.log(complex(M[0, 0])) * np.eye(n, dtype=complex)
    # noise can put copies of a negative eigenvalue on both sides of the cut;
    # turning the cut by a small angle keeps such a cluster on the +i pi side
    delta = 0.0
    if np.any(near_cut):
        delta = min(1e-2, 10.0 * float(np.max(np.abs(np.angle(-ev[near_cut]))))) + 1e-14
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        Y = scipy.linalg.logm(M * np.exp(-1j * delta)) + 1j * delta * np.eye(n)
    Y = np.asarray(Y, dtype=complex)
    if not np.all(np.isfinite(Y)):
        raise ConvergenceFailure("matrix logarithm failed to converge")
    return Y


def generalized_eigenspace(M, mu: complex, size: int) -> np.ndarray:
    """Orthonormal basis (n x size) of the generalized eigenspace of ``M`` near ``mu``.

    Taken as the right singular vectors of the ``size`` smallest singular values
    of (M - mu I)^size.
    """
    M = _as_square(M)
    n = M.shape[0]
    P = np.linalg.matrix_power(M - mu * np.eye(n), size)
    _, _, vh = np.linalg.svd(P)
    return vh[n - size:].conj().T
