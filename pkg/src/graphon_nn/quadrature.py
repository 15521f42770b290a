"""Adaptive composite Gauss-Legendre quadrature on [0, 1] and [0, 1]^2.

Integrands are vectorized: a 1-D integrand maps an array of points ``u`` of
shape ``(m,)`` to values of shape ``(..., m)``; the leading axes are
integrated independently. Breakpoints mark discontinuities or kinks so that
no cell straddles one.
"""

from __future__ import annotations

import numpy as np

_MAX_CELLS_PER_BATCH = 20000


def merge_breaks(*groups) -> np.ndarray:
    """Sorted unique breakpoints in [0, 1], always containing both ends."""
    pts = [np.array([0.0, 1.0])]
    for g in groups:
        if g is None:
            continue
        g = np.asarray(g, dtype=float).ravel()
        pts.append(g[(g >= 0.0) & (g <= 1.0)])
    return np.unique(np.concatenate(pts))


def _gauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _subdivide(breaks, min_cells):
    a, b = breaks[:-1], breaks[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    if len(a) >= min_cells:
        return a, b
    reps = int(np.ceil(min_cells / len(a)))
    t = np.linspace(0.0, 1.0, reps + 1)
    left = a[:, None] + (b - a)[:, None] * t[None, :-1]
    right = a[:, None] + (b - a)[:, None] * t[None, 1:]
    return left.ravel(), right.ravel()


def integrate(func, breaks=None, tol=1e-9, order=8, min_cells=16, max_depth=40):
    """Integrate ``func`` over [0, 1] to absolute tolerance ``tol``.

    Each cell is accepted once the order-``order`` rule on the cell agrees with
    the same rule on its two halves to within ``tol`` times the cell width, so
    the accumulated error estimate never exceeds ``tol``.
    """
    x, w = _gauss(order)
    a, b = _subdivide(merge_breaks(breaks), min_cells)
    total = None
    depth = 0
    while len(a):
        mid = 0.5 * (a + b)
        h = b - a
        pts = np.concatenate([
            (a[:, None] + h[:, None] * x).ravel(),
            (a[:, None] + 0.5 * h[:, None] * x).ravel(),
            (mid[:, None] + 0.5 * h[:, None] * x).ravel(),
        ])
        vals = np.asarray(func(pts), dtype=float)
        lead = vals.shape[:-1]
        vals = vals.reshape(lead + (3, len(a), order))
        if not np.all(np.isfinite(vals)):
            raise ValueError("integrand returned non-finite values")
        coarse = (vals[..., 0, :, :] @ w) * h
        fine = (vals[..., 1, :, :] @ w + vals[..., 2, :, :] @ w) * (0.5 * h)
        err = np.abs(coarse - fine)
        if err.ndim > 1:
            err = err.reshape(-1, len(a)).max(axis=0, initial=0.0)
        done = (err <= tol * h) | (depth >= max_depth)
        part = fine[..., done].sum(axis=-1)
        total = part if total is None else total + part
        a, b = np.concatenate([a[~done], mid[~done]]), np.concatenate([mid[~done], b[~done]])
        depth += 1
    return total


def integrate2d(func, xbreaks=None, ybreaks=None, tol=1e-9, order=4, max_depth=20):
    """Integrate ``func(u, v)`` over the unit square to absolute tolerance ``tol``.

    ``func`` receives two equal-length flat arrays and returns a flat array.
    Cells are rectangles of the product partition; each is compared against
    its four quadrants and refined until they agree to ``tol`` times its area.
    """
    x, w = _gauss(order)
    xb, yb = merge_breaks(xbreaks), merge_breaks(ybreaks)
    xa, ya = np.meshgrid(xb[:-1], yb[:-1], indexing="ij")
    xe, ye = np.meshgrid(xb[1:], yb[1:], indexing="ij")
    cells = np.stack([xa.ravel(), xe.ravel(), ya.ravel(), ye.ravel()], axis=1)
    cells = cells[(cells[:, 1] > cells[:, 0]) & (cells[:, 3] > cells[:, 2])]
    ww = np.outer(w, w).ravel()
    gx, gy = np.meshgrid(x, x, indexing="ij")
    gx, gy = gx.ravel(), gy.ravel()

    def rule(c):
        ax, bx, ay, by = c.T
        hx, hy = bx - ax, by - ay
        u = ax[:, None] + hx[:, None] * gx
        v = ay[:, None] + hy[:, None] * gy
        vals = np.asarray(func(u.ravel(), v.ravel()), dtype=float).reshape(u.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("integrand returned non-finite values")
        return (vals @ ww) * hx * hy

    def quarters(c):
        ax, bx, ay, by = c.T
        mx, my = 0.5 * (ax + bx), 0.5 * (ay + by)
        return np.concatenate([
            np.stack([ax, mx, ay, my], axis=1),
            np.stack([mx, bx, ay, my], axis=1),
            np.stack([ax, mx, my, by], axis=1),
            np.stack([mx, bx, my, by], axis=1),
        ])

    total = 0.0
    depth = 0
    while len(cells):
        pending = []
        for start in range(0, len(cells), _MAX_CELLS_PER_BATCH):
            c = cells[start:start + _MAX_CELLS_PER_BATCH]
            k = len(c)
            q = quarters(c)
            coarse = rule(c)
            fine = rule(q).reshape(4, k).sum(axis=0)
            area = (c[:, 1] - c[:, 0]) * (c[:, 3] - c[:, 2])
            done = (np.abs(coarse - fine) <= tol * area) | (depth >= max_depth)
            total += fine[done].sum()
            if not np.all(done):
                pending.append(q.reshape(4, k, 4)[:, ~done].reshape(-1, 4))
        cells = np.concatenate(pending) if pending else np.empty((0, 4))
        depth += 1
    return float(total)
