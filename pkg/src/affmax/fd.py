"""Finite-difference derivative estimation.

Centered high-order stencils on callables, and Fornberg weights for
arbitrary (possibly non-uniform) node sets when only sampled data is
available.  Fourth derivatives in double precision are noise-limited:
roundoff grows like eps*|f|/h^k, so the default steps below are sized
near the truncation/roundoff balance for 9-point O(h^6) stencils
instead of the naive h ~ 1e-4.
"""

from __future__ import annotations

import numpy as np

# balanced relative steps for 9-point stencils, by derivative order
DEFAULT_H_REL = {1: 5e-3, 2: 1e-2, 3: 1.7e-2, 4: 2.5e-2}


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights of derivatives 0..m at z from nodes x (Fornberg's recursion).

    Returns array of shape (m+1, len(x)); row k gives the weights whose
    dot product with f(x) approximates f^(k)(z).
    """
    x = np.asarray(x, dtype=float)
    nd = len(x)
    if nd < m + 1:
        raise ValueError("need at least m+1 nodes")
    c = np.zeros((m + 1, nd))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, nd):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
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


def derivative_from_callable(f, x0: float, order: int, h: float | None = None,
                             points: int = 9) -> float:
    """Centered stencil estimate of f^(order)(x0) using `points` nodes."""
    if h is None:
        h = DEFAULT_H_REL[order] * max(abs(x0), 1.0)
    half = points // 2
    nodes = x0 + h * np.arange(-half, half + 1)
    w = fornberg_weights(x0, nodes, order)[order]
    vals = np.array([f(t) for t in nodes], dtype=float)
    return float(w @ vals)


def one_sided_derivative(f, x0: float, order: int, h: float, points: int | None = None) -> float:
    """One-sided estimate of f^(order)(x0) from nodes x0, x0+h, ... (right side)."""
    if points is None:
        points = order + 4
    nodes = x0 + h * np.arange(points)
    w = fornberg_weights(x0, nodes, order)[order]
    vals = np.array([f(t) for t in nodes], dtype=float)
    return float(w @ vals)


def grid_derivative(x: np.ndarray, y: np.ndarray, order: int,
                    stencil: int | None = None) -> np.ndarray:
    """Derivative of sampled data at every node, via local Fornberg stencils.

    Works on non-uniform grids; each node uses its `stencil` nearest
    neighbours (by index window).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    npts = len(x)
    if stencil is None:
        stencil = max(order + 3, 5)
    if npts < stencil:
        from .errors import GridTooCoarse
        raise GridTooCoarse(f"need {stencil} nodes for order-{order} stencil, got {npts}")
    out = np.empty(npts)
    half = stencil // 2
    for i in range(npts):
        lo = min(max(0, i - half), npts - stencil)
        sl = slice(lo, lo + stencil)
        w = fornberg_weights(x[i], x[sl], order)[order]
        out[i] = w @ y[sl]
    return out
