"""Graph and graphon convolutions.

Two filter families are supported: polynomial taps ``h(lam) = sum_k h_k lam^k``
applied by iterated shifts, and even band-limited ramps that are constant on
``(-c, c)`` and Lipschitz elsewhere, applied through an eigendecomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graphon import FunctionSignal, GraphonSignal, ShiftOperator, StepSignal, merge_breaks
from .spectral import SpectralDecomposition, StepBasis

SUP_GRID = 4096
THEOREM_SUP = 1.0 - 1e-9


@dataclass(frozen=True, eq=False)
class FilterTaps:
    taps: np.ndarray

    def __post_init__(self):
        h = np.array(self.taps, dtype=float, copy=True).ravel()
        if h.size < 1:
            raise ValueError("a filter needs at least one tap")
        if not np.all(np.isfinite(h)):
            raise ValueError("filter taps must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "taps", h)

    @property
    def K(self) -> int:
        return self.taps.size

    def response(self, lam):
        return np.polynomial.polynomial.polyval(np.asarray(lam, dtype=float), self.taps)

    def spectral(self) -> "SpectralFilter":
        return polynomial_filter(self.taps)


@dataclass(frozen=True, eq=False)
class SpectralFilter:
    """Frequency response on [-1, 1] with its recorded constants.

    ``family`` is ``"polynomial"``, ``"banded-ramp"`` or ``"custom-table"``;
    ``c`` is the band below which the response is constant (0 when it is
    not banded).
    """

    response: Callable
    family: str
    c: float = 0.0
    lipschitz: float = 0.0
    sup_abs: float = 0.0
    params: dict = field(default_factory=dict)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.broadcast_to(np.asarray(self.response(lam), dtype=float), lam.shape)

    @property
    def h0(self) -> float:
        return float(self(0.0))

    def scaled(self, factor: float) -> "SpectralFilter":
        p = dict(self.params)
        if self.family == "banded-ramp":
            return make_banded_ramp(self.c, p["plateau"] * factor, p["slope"] * factor,
                                    strict=False)
        if self.family == "polynomial":
            return polynomial_filter(np.asarray(p["taps"]) * factor)
        return SpectralFilter(lambda lam: factor * self.response(lam), self.family, self.c,
                              abs(factor) * self.lipschitz, abs(factor) * self.sup_abs, p)


def polynomial_filter(taps) -> SpectralFilter:
    h = FilterTaps(taps)
    grid = np.linspace(-1.0, 1.0, SUP_GRID)
    k = np.arange(h.K)
    constant = bool(np.all(h.taps[1:] == 0))
    return SpectralFilter(
        response=h.response, family="polynomial", c=0.0,
        lipschitz=float(np.sum(k * np.abs(h.taps))),
        sup_abs=float(np.max(np.abs(h.response(grid)))),
        params={"taps": h.taps.tolist(), "constant": constant},
    )


def make_banded_ramp(c: float, plateau: float, slope: float, strict: bool = True) -> SpectralFilter:
    """Even ramp ``g(|lam|)``: ``plateau`` on ``[0, c)``, then ``plateau + slope (|lam| - c)``.

    With ``c = 1`` the response is the constant ``plateau`` on (-1, 1).
    The response is clipped to [-1, 1]. With ``strict`` the clip must never
    engage and the response must stay strictly inside (-1, 1), otherwise the
    parameters are rejected.
    """
    if not 0 < c <= 1:
        raise ValueError("band threshold c must lie in (0, 1]")
    if abs(plateau) > 1:
        raise ValueError("|plateau| must not exceed 1")
    end = plateau + slope * (1.0 - c)
    if strict and max(abs(plateau), abs(end)) >= 1:
        raise ValueError(
            f"ramp (c={c}, plateau={plateau}, slope={slope}) reaches |h| = "
            f"{max(abs(plateau), abs(end)):.6g}; filters must satisfy |h| < 1")

    def response(lam):
        a = np.abs(np.asarray(lam, dtype=float))
        return np.clip(plateau + slope * np.maximum(a - c, 0.0), -1.0, 1.0)

    return SpectralFilter(
        response=response, family="banded-ramp", c=float(c), lipschitz=abs(float(slope)),
        sup_abs=float(min(max(abs(plateau), abs(end)), 1.0)),
        params={"c": float(c), "plateau": float(plateau), "slope": float(slope)},
    )


def as_spectral(f) -> SpectralFilter:
    return f.spectral() if isinstance(f, FilterTaps) else f


# ---------------------------------------------------------------------------
# Graph convolutions
# ---------------------------------------------------------------------------


def _check_length(S, x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != S.n:
        raise ValueError(f"signal length {x.shape[0]} does not match graph size {S.n}")
    return x


def graph_convolve(h: FilterTaps, S: ShiftOperator, x) -> np.ndarray:
    """``sum_k h_k S^k x`` by ``K - 1`` iterated shifts.

    ``x`` may carry trailing batch axes, e.g. shape ``(n, B)``.
    """
    x = _check_length(S, x)
    taps = h.taps if isinstance(h, FilterTaps) else np.asarray(h, dtype=float)
    m = S.operator
    z = x
    out = taps[0] * z
    for hk in taps[1:]:
        z = m @ z
        out = out + hk * z
    return out


def graph_convolve_spectral(f, spec: SpectralDecomposition, x) -> np.ndarray:
    """``V f(Lambda) V^T x`` for a decomposition carrying eigenvectors."""
    if spec.vectors is None:
        raise ValueError("spectral graph convolution needs eigenvectors")
    x = np.asarray(x, dtype=float)
    if x.shape[0] != spec.vectors.shape[0]:
        raise ValueError(f"signal length {x.shape[0]} does not match graph size "
                         f"{spec.vectors.shape[0]}")
    f = as_spectral(f)
    v = spec.vectors
    resp = f(spec.eigenvalues)
    coeff = v.T @ x
    coeff = resp.reshape((-1,) + (1,) * (coeff.ndim - 1)) * coeff
    return v @ coeff


# ---------------------------------------------------------------------------
# Graphon convolutions
# ---------------------------------------------------------------------------


def graphon_convolve(f, W_spec: SpectralDecomposition, X: GraphonSignal) -> GraphonSignal:
    """``T_H X = h(0) X + sum_i (h(lam_i) - h(0)) <X, phi_i> phi_i``.

    The sum runs over the eigenpairs held by ``W_spec``; every other
    direction is an eigenvalue-zero direction of the operator. For a step
    spectrum and a step signal on the same grid the result is an exact step
    signal; otherwise it is a function evaluated through the eigenbasis.
    Truncated analytic spectra drop eigenvalues below ``ZERO_TOL``, which
    moves a banded output by at most that amount times ``||X||``.
    """
    f = as_spectral(f)
    h0 = f.h0
    gain = f(W_spec.eigenvalues) - h0
    if not (gain != 0).all():
        W_spec = W_spec.restrict(gain != 0)
        gain = gain[gain != 0]
    if not len(gain):
        if isinstance(X, StepSignal):
            return StepSignal(h0 * X.values)
        return FunctionSignal(lambda u: h0 * X(u), breaks=X.breaks, name="graphon-convolution")
    basis = W_spec.basis
    coeff = gain * basis.inner(X)
    if (isinstance(basis, StepBasis) and isinstance(X, StepSignal)
            and np.array_equal(basis.edges, X.edges)):
        return StepSignal(h0 * X.values + basis.cell_values @ coeff)

    def func(u):
        return h0 * X(u) + basis.evaluate(u) @ coeff

    return FunctionSignal(func, breaks=merge_breaks(basis.breaks, X.breaks),
                          name="graphon-convolution")


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterConstants:
    lipschitz: float
    sup_abs: float
    c_effective: float
    lipschitz_grid: float
    certified: bool


def filter_constants(f, grid_m: int = SUP_GRID) -> FilterConstants:
    """Lipschitz constant ``A2``, ``sup |h|`` and the constant-band width.

    Polynomial filters report the certified bound ``sum_k k |h_k|``; banded
    ramps report their construction slope and band. Everything else falls
    back to grid probes, which only bound the constants from below.
    """
    if grid_m < 256:
        raise ValueError("grid_m must be at least 256")
    f = as_spectral(f)
    lam = np.linspace(-1.0, 1.0, grid_m)
    r = f(lam)
    grid_lip = float(np.max(np.abs(np.diff(r))) / (lam[1] - lam[0]))
    sup = float(np.max(np.abs(r)))
    if f.family == "polynomial":
        const = f.params.get("constant", False)
        return FilterConstants(f.lipschitz, sup, 1.0 if const else 0.0, grid_lip, True)
    if f.family == "banded-ramp":
        return FilterConstants(f.lipschitz, sup, f.c, grid_lip, True)
    r0 = f(0.0)
    off = np.abs(r - r0) > 1e-12
    if not off.any():
        c_eff = 1.0
    else:
        c_eff = float(np.min(np.abs(lam[off])))
    return FilterConstants(grid_lip, sup, c_eff, grid_lip, False)
