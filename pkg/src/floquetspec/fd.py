"""Finite-difference stencils (Fornberg weights) on uniform grids."""
from __future__ import annotations

import numpy as np

__all__ = ["fornberg_weights", "stencil_width", "derivative_matrix_rows", "GridTooCoarse"]


class GridTooCoarse(ValueError):
    """The grid has fewer points than the stencil needs."""


def fornberg_weights(z: float, x, m: int) -> np.ndarray:
    """Weights c[k, j] so that f^(k)(z) ~ sum_j c[k, j] f(x_j) for k = 0..m.

    Fornberg's recursion; stable for the short stencils used here.
    """
    x = np.asarray(x, dtype=float)
    npts = len(x)
    c = np.zeros((m + 1, npts))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, m)
        c2, c5 = 1.0, c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def stencil_width(order: int, accuracy: int = 4) -> int:
    """Points in a centered stencil of the given derivative order and (even) accuracy."""
    return 2 * ((order + 1) // 2) - 1 + accuracy


def derivative_matrix_rows(npts: int, h: float, order: int, accuracy: int = 4) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Per grid row: (row, column indices, weights) for the ``order``-th derivative.

    Centered stencils in the interior, shifted (one-sided) ones near the ends so
    that every row keeps the same width and formal accuracy.
    """
    w = stencil_width(order, accuracy)
    if order == 0:
        return [(r, np.array([r]), np.array([1.0])) for r in range(npts)]
    if w > npts:
        raise GridTooCoarse(f"stencil of width {w} needs at least {w} grid points, got {npts}")
    half = w // 2
    rows = []
    cache: dict[int, np.ndarray] = {}
    for r in range(npts):
        start = min(max(r - half, 0), npts - w)
        offset = r - start
        if offset not in cache:
            cache[offset] = fornberg_weights(0.0, np.arange(w) - offset, order)[order] / h ** order
        rows.append((r, np.arange(start, start + w), cache[offset]))
    return rows
