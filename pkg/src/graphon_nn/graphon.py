"""Graphons, graphon signals, deterministic sampling and step-function lifts.

Conventions
-----------
Node ``i`` (zero-based) of a graph sampled at size ``n`` sits at the left
endpoint ``u_i = i / n`` and owns the interval ``I_i = [i/n, (i+1)/n)``; the
last interval is closed. Step objects are evaluated with ``searchsorted`` on
the edge array ``arange(n + 1) / n`` so that the sample points map back to
their own interval bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .quadrature import integrate, integrate2d, merge_breaks

L2_TOL = 1e-9
GRAPHON_L2_TOL = 1e-8


def grid_edges(n: int) -> np.ndarray:
    return np.arange(n + 1) / n


def sample_points(n: int) -> np.ndarray:
    return np.arange(n) / n


def _check_size(n):
    if int(n) != n or n < 1:
        raise ValueError(f"size must be a positive integer, got {n!r}")
    return int(n)


def _locate(edges, u):
    idx = np.searchsorted(edges, u, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


# ---------------------------------------------------------------------------
# Graphons
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Graphon:
    """Bounded symmetric kernel on the unit square.

    ``kind`` is ``"analytic"`` for callable kernels, ``"sbm"`` for stochastic
    block models on an arbitrary partition and ``"step"`` for piecewise
    constant kernels on the uniform ``n``-interval grid. Piecewise kernels
    keep their partition in ``edges`` and their block values in ``matrix``.

    ``lipschitz`` is the certified constant ``A1`` (None when the kernel is
    not Lipschitz or the constant is unknown). ``breaks`` lists coordinates
    where the kernel is not smooth along either axis; quadrature never lets a
    cell straddle one of them.
    """

    kernel: Callable
    kind: str = "analytic"
    lipschitz: Optional[float] = None
    name: str = "custom"
    edges: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    breaks: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))
    params: dict = field(default_factory=dict)
    # Closed-form nonzero spectrum: (eigenvalues, u -> (len(u), r) eigenfunctions).
    spectrum: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("analytic", "sbm", "step"):
            raise ValueError(f"unknown graphon kind {self.kind!r}")
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        if self.matrix is not None:
            m = self.matrix
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("block matrix must be square")
            if not np.array_equal(m, m.T):
                raise ValueError("block matrix must be symmetric")
            if np.any(m < 0) or np.any(m > 1) or not np.all(np.isfinite(m)):
                raise ValueError("block values must lie in [0, 1]")
        else:
            g = np.linspace(0.0, 1.0, 33)
            vals = np.asarray(self(g[:, None], g[None, :]), dtype=float)
            if not np.allclose(vals, vals.T, rtol=0, atol=1e-12):
                raise ValueError(f"graphon {self.name!r} is not symmetric")
            if vals.min() < -1e-12 or vals.max() > 1 + 1e-12:
                raise ValueError(f"graphon {self.name!r} leaves [0, 1]")

    def __call__(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.matrix is not None:
            return self.matrix[_locate(self.edges, u), _locate(self.edges, v)]
        return np.broadcast_to(self.kernel(u, v), np.broadcast_shapes(u.shape, v.shape))

    @property
    def is_step(self) -> bool:
        return self.matrix is not None

    @property
    def n(self) -> Optional[int]:
        """Grid size of a uniform step graphon, None otherwise."""
        return self.matrix.shape[0] if self.kind == "step" else None


def step_graphon(matrix, name="step") -> Graphon:
    """Piecewise constant graphon equal to ``matrix[i, j]`` on ``I_i x I_j``."""
    m = np.array(matrix, dtype=float, copy=True)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    m.setflags(write=False)
    n = m.shape[0]
    edges = grid_edges(n)
    return Graphon(kernel=None, kind="step", name=name, edges=edges, matrix=m,
                   breaks=edges)


def block_graphon(probs, proportions=None, name="sbm") -> Graphon:
    """Stochastic block model with block probability matrix ``probs``.

    Communities occupy consecutive intervals whose lengths are
    ``proportions`` (balanced by default). A node sitting exactly on a block
    boundary belongs to the block on its right.
    """
    b = np.array(probs, dtype=float, copy=True)
    k = b.shape[0]
    prop = np.full(k, 1.0 / k) if proportions is None else np.asarray(proportions, float)
    if len(prop) != k or np.any(prop <= 0) or not math.isclose(prop.sum(), 1.0):
        raise ValueError("proportions must be positive and sum to one")
    edges = np.concatenate([[0.0], np.cumsum(prop)])
    edges[-1] = 1.0
    b.setflags(write=False)
    return Graphon(kernel=None, kind="sbm", name=name, edges=edges, matrix=b,
                   breaks=edges, params={"probs": b.tolist(), "proportions": prop.tolist()})


def sbm_graphon(p=0.8, q=0.2, blocks=2) -> Graphon:
    probs = np.full((blocks, blocks), q)
    np.fill_diagonal(probs, p)
    return block_graphon(probs, name="sbm")


def constant_graphon(c=0.5) -> Graphon:
    if not 0 <= c <= 1:
        raise ValueError("constant graphon value must lie in [0, 1]")
    return Graphon(
        kernel=lambda u, v: np.full(np.broadcast_shapes(np.shape(u), np.shape(v)), float(c)),
        lipschitz=0.0, name="constant", params={"c": c},
        spectrum=(np.array([float(c)]) if c > 0 else np.zeros(0),
                  (lambda u: np.ones((np.size(u), 1))) if c > 0
                  else (lambda u: np.zeros((np.size(u), 0)))),
    )


def product_graphon() -> Graphon:
    """``W(u, v) = u v``: rank one, eigenvalue 1/3 with eigenfunction sqrt(3) u."""
    return Graphon(
        kernel=lambda u, v: u * v, lipschitz=1.0, name="product",
        spectrum=(np.array([1.0 / 3.0]),
                  lambda u: math.sqrt(3.0) * np.asarray(u, float).reshape(-1, 1)),
    )


def gaussian_graphon(sigma=0.5) -> Graphon:
    """``W(u, v) = exp(-(u - v)^2 / (2 sigma^2))``, values in (0, 1]."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    # max over d in [0, 1] of |d / sigma^2 * exp(-d^2 / (2 sigma^2))|
    d = min(sigma, 1.0)
    a1 = d / sigma**2 * math.exp(-d * d / (2 * sigma**2))
    return Graphon(kernel=lambda u, v: np.exp(-((u - v) ** 2) / (2 * sigma**2)),
                   lipschitz=a1, name="gaussian", params={"sigma": sigma})


def min_graphon() -> Graphon:
    """``W(u, v) = min(u, v)``; eigenvalues 1 / ((k - 1/2)^2 pi^2), k >= 1."""
    return Graphon(kernel=np.minimum, lipschitz=1.0, name="min")


def ramp_sbm_graphon(p=0.8, q=0.2, boundary=1.0 / 3.0, width=1e-3) -> Graphon:
    """Two-community SBM whose membership switches linearly over ``width``.

    Membership ``s(u)`` falls from 1 to 0 on ``[boundary - width/2,
    boundary + width/2]`` and ``W = q + (p - q)(s(u)s(v) + (1 - s(u))(1 - s(v)))``,
    which is ``(p - q) / width``-Lipschitz. For sizes well below ``1 / width``
    it behaves like a block model with a boundary off the sampling grid.
    """
    if not (0 < width and width / 2 < boundary < 1 - width / 2):
        raise ValueError("ramp must fit strictly inside the unit interval")
    if not 0 <= q <= p <= 1:
        raise ValueError("require 0 <= q <= p <= 1")
    lo, hi = boundary - width / 2, boundary + width / 2

    def member(u):
        return np.clip((hi - u) / width, 0.0, 1.0)

    def kernel(u, v):
        su, sv = member(u), member(v)
        return q + (p - q) * (su * sv + (1 - su) * (1 - sv))

    return Graphon(kernel=kernel, lipschitz=(p - q) / width, name="ramp-sbm",
                   breaks=np.array([0.0, lo, hi, 1.0]),
                   params={"p": p, "q": q, "boundary": boundary, "width": width})


GRAPHON_FAMILIES = {
    "product": product_graphon,
    "gaussian": gaussian_graphon,
    "min": min_graphon,
    "ramp-sbm": ramp_sbm_graphon,
    "constant": constant_graphon,
    "sbm": sbm_graphon,
}

SMOOTH_FAMILIES = ("product", "gaussian", "min")


def graphon_family(name: str, **params) -> Graphon:
    try:
        factory = GRAPHON_FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown graphon family {name!r}; "
                         f"choose from {sorted(GRAPHON_FAMILIES)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# Graphon signals
# ---------------------------------------------------------------------------


class GraphonSignal:
    """Square-integrable function on [0, 1]."""

    lipschitz: Optional[float] = None
    breaks: np.ndarray = np.array([0.0, 1.0])

    def __call__(self, u):
        raise NotImplementedError


class FunctionSignal(GraphonSignal):
    def __init__(self, func, lipschitz=None, breaks=None, name="custom"):
        if lipschitz is not None and lipschitz < 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        self.func = func
        self.lipschitz = lipschitz
        self.breaks = merge_breaks(breaks)
        self.name = name

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(np.asarray(self.func(u), dtype=float), u.shape)

    def __repr__(self):
        return f"FunctionSignal({self.name!r}, lipschitz={self.lipschitz})"


class StepSignal(GraphonSignal):
    """Signal equal to ``values[i]`` on ``I_i`` of the uniform grid."""

    def __init__(self, values):
        v = np.array(values, dtype=float, copy=True).ravel()
        if v.size == 0:
            raise ValueError("step signal needs at least one value")
        v.setflags(write=False)
        self.values = v
        self.edges = grid_edges(v.size)
        self.breaks = self.edges
        self.lipschitz = 0.0 if np.all(v == v[0]) else None

    @property
    def n(self) -> int:
        return self.values.size

    def __call__(self, u):
        return self.values[_locate(self.edges, np.asarray(u, dtype=float))]

    def __repr__(self):
        return f"StepSignal(n={self.n})"


def linear_signal(slope=1.0, offset=0.0) -> FunctionSignal:
    return FunctionSignal(lambda u: offset + slope * u, lipschitz=abs(slope), name="linear")


def sine_signal(freq=1.0, amplitude=1.0) -> FunctionSignal:
    return FunctionSignal(lambda u: amplitude * np.sin(2 * np.pi * freq * u),
                          lipschitz=abs(2 * np.pi * freq * amplitude), name="sine")


def constant_signal(c=1.0) -> FunctionSignal:
    return FunctionSignal(lambda u: np.full(np.shape(u), float(c)), lipschitz=0.0,
                          name="constant")


def tent_signal(height=1.0) -> FunctionSignal:
    return FunctionSignal(lambda u: height * (1 - np.abs(2 * u - 1)),
                          lipschitz=2 * abs(height), breaks=[0.5], name="tent")


SIGNAL_FAMILIES = {
    "linear": linear_signal,
    "sine": sine_signal,
    "constant": constant_signal,
    "tent": tent_signal,
}


def signal_family(name: str, **params) -> FunctionSignal:
    try:
        factory = SIGNAL_FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown signal family {name!r}; "
                         f"choose from {sorted(SIGNAL_FAMILIES)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# Shift operators
# ---------------------------------------------------------------------------

NORMALIZATIONS = ("adjacency", "adjacency-over-n")


@dataclass(frozen=True, eq=False)
class ShiftOperator:
    """Dense symmetric graph shift operator.

    ``matrix`` always holds the raw adjacency; ``normalization`` decides
    whether convolutions shift with ``matrix`` or ``matrix / n``.
    """

    matrix: np.ndarray
    normalization: str = "adjacency"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValueError(f"shift operator must be a nonempty square matrix, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("shift operator has non-finite entries")
        if np.max(np.abs(m - m.T)) > 1e-12:
            raise ValueError("shift operator must be symmetric")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def operator(self) -> np.ndarray:
        """Matrix actually applied by one shift."""
        if self.normalization == "adjacency-over-n":
            return self.matrix / self.n
        return self.matrix

    def with_normalization(self, normalization: str) -> "ShiftOperator":
        return ShiftOperator(self.matrix, normalization)


# ---------------------------------------------------------------------------
# Sampling and induction
# ---------------------------------------------------------------------------


def sample_graph(W: Graphon, n: int) -> ShiftOperator:
    """Deterministic graph ``[S]_ij = W(u_i, u_j)`` with ``u_i = i / n``."""
    n = _check_size(n)
    u = sample_points(n)
    vals = np.asarray(W(u[:, None], u[None, :]), dtype=float)
    upper = np.triu(vals)
    return ShiftOperator(upper + np.triu(vals, 1).T, "adjacency")


def sample_signal(X: GraphonSignal, n: int) -> np.ndarray:
    """Deterministic graph signal ``[x]_i = X(u_i)``."""
    n = _check_size(n)
    return np.array(X(sample_points(n)), dtype=float)


def induce_graphon(S) -> Graphon:
    """Step graphon induced by a graph; uses the raw adjacency entries."""
    m = S.matrix if isinstance(S, ShiftOperator) else np.asarray(S, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.array_equal(m, m.T):
        raise ValueError("cannot induce a graphon from an asymmetric matrix")
    return step_graphon(m, name=f"induced(n={m.shape[0]})")


def induce_signal(x) -> StepSignal:
    return StepSignal(x)


# ---------------------------------------------------------------------------
# Norms and distances
# ---------------------------------------------------------------------------


def _step_parts(X):
    return X.edges, X.values


def l2_norm(X: GraphonSignal, tol=L2_TOL) -> float:
    if isinstance(X, StepSignal):
        return float(np.sqrt(np.sum(X.values**2) / X.n))
    return float(np.sqrt(max(integrate(lambda u: X(u) ** 2, X.breaks, tol=tol), 0.0)))


def l2_distance(A: GraphonSignal, B: GraphonSignal, tol=L2_TOL) -> float:
    """L2([0, 1]) distance between two graphon signals.

    Two step signals are compared exactly on the merged partition of their
    grids. Otherwise the squared difference is integrated adaptively to
    absolute tolerance ``tol`` on a partition respecting both signals'
    breakpoints.
    """
    if isinstance(A, StepSignal) and isinstance(B, StepSignal):
        br = merge_breaks(A.edges, B.edges)
        mid = 0.5 * (br[:-1] + br[1:])
        d = A(mid) - B(mid)
        if not np.all(np.isfinite(d)):
            raise ValueError("non-finite signal values")
        return float(np.sqrt(np.sum(d * d * np.diff(br))))
    sq = integrate(lambda u: (A(u) - B(u)) ** 2, merge_breaks(A.breaks, B.breaks), tol=tol)
    return float(np.sqrt(max(sq, 0.0)))


def graphon_l2_distance(W1: Graphon, W2: Graphon, tol=GRAPHON_L2_TOL) -> float:
    """L2([0, 1]^2) distance; exact on merged partitions for piecewise kernels."""
    if W1.is_step and W2.is_step:
        br = merge_breaks(W1.edges, W2.edges)
        mid = 0.5 * (br[:-1] + br[1:])
        w = np.diff(br)
        i1, i2 = _locate(W1.edges, mid), _locate(W2.edges, mid)
        d = W1.matrix[np.ix_(i1, i1)] - W2.matrix[np.ix_(i2, i2)]
        return float(np.sqrt(np.einsum("ij,i,j->", d * d, w, w)))
    br = merge_breaks(W1.breaks, W2.breaks)
    sq = integrate2d(lambda u, v: (W1(u, v) - W2(u, v)) ** 2, br, br, tol=tol)
    return float(np.sqrt(max(sq, 0.0)))


def estimate_lipschitz(W: Graphon, grid_m: int = 256) -> float:
    """Largest axis-wise difference quotient on an ``m x m`` grid.

    This is a lower bound on the true constant ``A1``; families with an
    analytic constant carry it in ``W.lipschitz``, which takes precedence.
    """
    if grid_m < 2:
        raise ValueError("grid_m must be at least 2")
    g = np.linspace(0.0, 1.0, grid_m)
    h = g[1] - g[0]
    vals = np.asarray(W(g[:, None], g[None, :]), dtype=float)
    du = np.abs(np.diff(vals, axis=0)).max() / h
    dv = np.abs(np.diff(vals, axis=1)).max() / h
    return float(max(du, dv))


def estimate_signal_lipschitz(X: GraphonSignal, grid_m: int = 4096) -> float:
    g = np.linspace(0.0, 1.0, grid_m)
    return float(np.abs(np.diff(X(g))).max() / (g[1] - g[0]))


# ---------------------------------------------------------------------------
# Plain-text step format: first line n, then rows of %.17g values
# ---------------------------------------------------------------------------


def _write_rows(fh, n, rows):
    fh.write(f"{n}\n")
    for row in rows:
        fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def _read_numbers(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty step file")
    n = int(lines[0])
    vals = np.array([float(t) for ln in lines[1:] for t in ln.split()])
    return n, vals


def save_step_graphon(path, W) -> None:
    m = W.matrix if isinstance(W, Graphon) else np.asarray(W, dtype=float)
    with open(path, "w") as fh:
        _write_rows(fh, m.shape[0], m)


def load_step_graphon(path) -> Graphon:
    n, vals = _read_numbers(path)
    if vals.size != n * n:
        raise ValueError(f"{path}: expected {n * n} values, found {vals.size}")
    return step_graphon(vals.reshape(n, n))


def save_step_signal(path, X) -> None:
    v = X.values if isinstance(X, StepSignal) else np.asarray(X, dtype=float)
    with open(path, "w") as fh:
        _write_rows(fh, v.size, [v])


def load_step_signal(path) -> StepSignal:
    n, vals = _read_numbers(path)
    if vals.size != n:
        raise ValueError(f"{path}: expected {n} values, found {vals.size}")
    return StepSignal(vals)
