"""Layered GNN and WNN maps sharing one graph-agnostic parameter set.

Graph features are arrays of shape ``(F, n)`` or ``(F, n, B)`` for a batch of
``B`` signals; graphon features are lists of :class:`GraphonSignal`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .filters import (
    THEOREM_SUP,
    FilterTaps,
    SpectralFilter,
    make_banded_ramp,
    polynomial_filter,
)
from .graphon import (
    FunctionSignal,
    Graphon,
    GraphonSignal,
    ShiftOperator,
    StepSignal,
    merge_breaks,
    sample_graph,
    sample_signal,
)
from .spectral import SpectralDecomposition, StepBasis, decompose_graph

ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


@dataclass(frozen=True, eq=False)
class GnnParams:
    """Filters ``h_l^{fg}`` for every layer and feature pair.

    Each entry of ``layers`` is either a float array of polynomial taps with
    shape ``(F_l, F_{l-1}, K_l)`` or an object array of
    :class:`SpectralFilter` with shape ``(F_l, F_{l-1})``. With
    ``linear_output`` the last layer skips the activation, which turns it
    into a linear readout.
    """

    layers: tuple
    activation: str = "relu"
    linear_output: bool = False

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}")
        if not self.layers:
            raise ValueError("a GNN needs at least one layer")
        fixed = []
        for ell, layer in enumerate(self.layers):
            arr = np.array(layer, dtype=object if _is_spectral(layer) else float, copy=True)
            if arr.dtype == object:
                if arr.ndim != 2 or not all(isinstance(f, SpectralFilter) for f in arr.flat):
                    raise ValueError(f"layer {ell}: expected a 2-D array of spectral filters")
            elif arr.ndim != 3 or arr.shape[2] < 1 or not np.all(np.isfinite(arr)):
                raise ValueError(f"layer {ell}: taps must be a finite (F_out, F_in, K) array")
            if fixed and arr.shape[1] != fixed[-1].shape[0]:
                raise ValueError(f"layer {ell}: expects {arr.shape[1]} input features, "
                                 f"previous layer gives {fixed[-1].shape[0]}")
            arr.setflags(write=False)
            fixed.append(arr)
        object.__setattr__(self, "layers", tuple(fixed))

    @property
    def L(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> tuple:
        return (self.layers[0].shape[1],) + tuple(layer.shape[0] for layer in self.layers)

    def is_polynomial(self, ell: int) -> bool:
        return self.layers[ell].dtype != object

    @property
    def family(self) -> str:
        kinds = {"polynomial" if self.is_polynomial(ell) else self.layers[ell][0, 0].family
                 for ell in range(self.L)}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    def filter(self, ell: int, f: int, g: int):
        layer = self.layers[ell]
        return FilterTaps(layer[f, g]) if layer.dtype != object else layer[f, g]

    def spectral_filter(self, ell: int, f: int, g: int) -> SpectralFilter:
        layer = self.layers[ell]
        return polynomial_filter(layer[f, g]) if layer.dtype != object else layer[f, g]

    def activation_for(self, ell: int) -> str:
        return "identity" if self.linear_output and ell == self.L - 1 else self.activation

    def responses(self, ell: int, lam) -> np.ndarray:
        """``R[f, g, i] = h_l^{fg}(lam_i)``."""
        layer = self.layers[ell]
        lam = np.asarray(lam, dtype=float)
        if layer.dtype != object:
            powers = lam[None, :] ** np.arange(layer.shape[2])[:, None]
            return np.einsum("fgk,ki->fgi", layer, powers)
        return np.stack([np.stack([f(lam) for f in row]) for row in layer])

    def flat(self) -> np.ndarray:
        if not all(self.is_polynomial(ell) for ell in range(self.L)):
            raise ValueError("only polynomial parameter sets flatten to a vector")
        return np.concatenate([layer.ravel() for layer in self.layers])

    def with_flat(self, theta) -> "GnnParams":
        theta = np.asarray(theta, dtype=float)
        out, pos = [], 0
        for layer in self.layers:
            out.append(theta[pos:pos + layer.size].reshape(layer.shape))
            pos += layer.size
        if pos != theta.size:
            raise ValueError(f"expected {pos} parameters, got {theta.size}")
        return GnnParams(tuple(out), self.activation, self.linear_output)


def _is_spectral(layer):
    if isinstance(layer, np.ndarray):
        return layer.dtype == object
    first = layer
    while isinstance(first, (list, tuple)):
        if not first:
            return False
        first = first[0]
    return isinstance(first, SpectralFilter)


def check_theorem_mode(H: GnnParams) -> float:
    """Validate the architecture the bounds assume and return the common band ``c``.

    Requires ``F_0 = F_L = 1``, equal hidden widths, banded spectral filters
    sharing one ``c > 0`` with ``sup |h| <= 1 - 1e-9``, and no linear readout.
    """
    w = H.widths
    if w[0] != 1 or w[-1] != 1 or len(set(w[1:-1])) > 1:
        raise ValueError(f"theorem mode needs widths (1, F, ..., F, 1), got {w}")
    if H.linear_output:
        raise ValueError("theorem mode applies the activation in every layer")
    bands = set()
    for ell in range(H.L):
        if H.is_polynomial(ell):
            raise ValueError("theorem mode needs banded spectral filters")
        for f in H.layers[ell].flat:
            if f.c <= 0:
                raise ValueError("theorem mode needs filters constant on (-c, c), c > 0")
            if f.sup_abs > THEOREM_SUP:
                raise ValueError(f"filter sup |h| = {f.sup_abs} exceeds {THEOREM_SUP}")
            bands.add(f.c)
    if len(bands) != 1:
        raise ValueError(f"filters must share one band threshold, got {sorted(bands)}")
    return bands.pop()


def to_theorem_mode(H: GnnParams) -> GnnParams:
    """Rescale any filter whose ``sup |h|`` exceeds ``1 - 1e-9``."""
    layers = []
    for layer in H.layers:
        if layer.dtype != object:
            layers.append(layer)
            continue
        new = np.empty(layer.shape, dtype=object)
        for idx, f in np.ndenumerate(layer):
            new[idx] = f.scaled(THEOREM_SUP / f.sup_abs) if f.sup_abs > THEOREM_SUP else f
        layers.append(new)
    return GnnParams(tuple(layers), H.activation, H.linear_output)


def random_banded_params(rng, L: int, F: int, c: float, activation="relu",
                         max_abs=0.95) -> GnnParams:
    """Theorem-mode parameters: widths (1, F, ..., F, 1), random ramps with band ``c``."""
    widths = [1] + [F] * (L - 1) + [1]
    layers = []
    for ell in range(L):
        layer = np.empty((widths[ell + 1], widths[ell]), dtype=object)
        for idx in np.ndindex(layer.shape):
            plateau, end = rng.uniform(-max_abs, max_abs, size=2)
            layer[idx] = make_banded_ramp(c, plateau, (end - plateau) / (1 - c) if c < 1 else 0.0)
        layers.append(layer)
    return GnnParams(tuple(layers), activation)


def random_polynomial_params(rng, widths: Sequence[int], K, activation="relu",
                             scale=None, linear_output=False) -> GnnParams:
    """Taps uniform in ``[-s, s]`` with ``s = 1 / (K sqrt(F_in))`` unless ``scale`` is given."""
    ks = [K] * (len(widths) - 1) if np.isscalar(K) else list(K)
    layers = []
    for ell, k in enumerate(ks):
        s = scale if scale is not None else 1.0 / (k * np.sqrt(widths[ell]))
        layers.append(rng.uniform(-s, s, size=(widths[ell + 1], widths[ell], k)))
    return GnnParams(tuple(layers), activation, linear_output)


# ---------------------------------------------------------------------------
# Graph forward pass
# ---------------------------------------------------------------------------


def _as_batch(S, x, f0):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 2
    if x.ndim == 1:
        x = x[None, :]
        squeeze = True
    if squeeze:
        x = x[..., None]
    if x.ndim != 3:
        raise ValueError("features must have shape (F, n) or (F, n, B)")
    if x.shape[0] != f0:
        raise ValueError(f"expected {f0} input features, got {x.shape[0]}")
    if x.shape[1] != S.n:
        raise ValueError(f"feature length {x.shape[1]} does not match graph size {S.n}")
    return x, squeeze


def _layer_pre(H, ell, m, spec, x):
    """Pre-activation of layer ``ell`` and the shifted inputs it used."""
    layer = H.layers[ell]
    if layer.dtype != object:
        shifts = [x]
        for _ in range(layer.shape[2] - 1):
            shifts.append(np.matmul(m, shifts[-1]))
        z = np.stack(shifts)
        return np.einsum("fgk,kgnb->fnb", layer, z), z
    v = spec.vectors
    xhat = np.einsum("ji,gjb->gib", v, x)
    uhat = np.einsum("fgi,gib->fib", H.responses(ell, spec.eigenvalues), xhat)
    return np.einsum("ij,fjb->fib", v, uhat), None


def forward_with_cache(H: GnnParams, S: ShiftOperator, x, spec=None):
    """Forward pass keeping ``(shifted inputs, pre-activation)`` per layer."""
    x, squeeze = _as_batch(S, x, H.widths[0])
    if spec is None and not all(H.is_polynomial(ell) for ell in range(H.L)):
        spec = decompose_graph(S)
    m = S.operator
    cache = []
    for ell in range(H.L):
        pre, z = _layer_pre(H, ell, m, spec, x)
        cache.append((z, pre))
        x = ACTIVATIONS[H.activation_for(ell)][0](pre)
    return (x[..., 0] if squeeze else x), cache


def gnn_forward(H: GnnParams, S: ShiftOperator, x, spec=None) -> np.ndarray:
    """``x_l^f = rho(sum_g h_l^{fg} *_S x_{l-1}^g)`` for ``l = 1..L``.

    Polynomial filters shift with ``S.operator`` and never form matrix
    powers; spectral filters act through ``decompose_graph(S)`` (pass
    ``spec`` to reuse one).
    """
    return forward_with_cache(H, S, x, spec)[0]


# ---------------------------------------------------------------------------
# Graphon forward pass
# ---------------------------------------------------------------------------


class _WnnEvaluator:
    """Evaluates every layer of a WNN pointwise once the projections are known.

    Layer ``l`` computes ``Z^f(u) = sum_g h^{fg}(0) X^g(u) + sum_i C[f, i] phi_i(u)``
    with ``C[f, i] = sum_g (h^{fg}(lam_i) - h^{fg}(0)) <X^g, phi_i>``.
    """

    def __init__(self, H, spec, inputs, tol):
        self.H = H
        self.basis = spec.basis
        self.inputs = list(inputs)
        self.breaks = merge_breaks(self.basis.breaks, *[X.breaks for X in self.inputs])
        self.h0, self.coef = [], []
        for ell in range(H.L):
            resp = H.responses(ell, np.concatenate([[0.0], spec.eigenvalues]))
            h0, gain = resp[..., 0], resp[..., 1:] - resp[..., :1]
            proj = self.basis.project(lambda u, e=ell: self._layers(u, e), self.breaks, tol=tol)
            self.h0.append(h0)
            self.coef.append(np.einsum("fgi,gi->fi", gain, proj))

    def _layers(self, u, upto, phi=None):
        x = np.stack([np.asarray(X(u), dtype=float) for X in self.inputs])
        if upto and phi is None:
            phi = self.basis.evaluate(u)
        for ell in range(upto):
            pre = self.h0[ell] @ x + self.coef[ell] @ phi.T
            x = ACTIVATIONS[self.H.activation_for(ell)][0](pre)
        return x

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        out = self._layers(flat, self.H.L)
        return out.reshape((out.shape[0],) + u.shape)


def _active_modes(H, spec):
    """Drop eigenpairs on which every filter equals its response at zero.

    Those directions pass through as ``h(0) X``, so leaving them out is exact
    and spares evaluating eigenfunctions (banded filters ignore all
    ``|lam| < c``).
    """
    lam = np.concatenate([[0.0], spec.eigenvalues])
    active = np.zeros(len(spec.eigenvalues), dtype=bool)
    for ell in range(H.L):
        resp = H.responses(ell, lam)
        active |= np.any(resp[..., 1:] != resp[..., :1], axis=(0, 1))
    return spec if active.all() else spec.restrict(active)


def wnn_forward(H: GnnParams, W_spec: SpectralDecomposition, X: Sequence[GraphonSignal],
                tol: float = 1e-11) -> list:
    """``X_l^f = rho(sum_g h_l^{fg} *_W X_{l-1}^g)`` on the graphon of ``W_spec``.

    Exact when ``W_spec`` comes from a step graphon and every input is a step
    signal on that grid (the result is then a list of step signals). Otherwise
    inner products with the eigenfunctions are computed by adaptive
    quadrature to absolute tolerance ``tol`` and the outputs are functions.
    """
    X = [X] if isinstance(X, GraphonSignal) else list(X)
    if len(X) != H.widths[0]:
        raise ValueError(f"expected {H.widths[0]} input features, got {len(X)}")
    basis = W_spec.basis
    if (W_spec.vectors is not None and isinstance(basis, StepBasis)
            and all(isinstance(s, StepSignal) and s.n == W_spec.n for s in X)):
        v = W_spec.vectors
        x = np.stack([s.values for s in X])
        for ell in range(H.L):
            xhat = v.T @ x.T
            uhat = np.einsum("fgi,ig->if", H.responses(ell, W_spec.eigenvalues), xhat)
            x = ACTIVATIONS[H.activation_for(ell)][0]((v @ uhat).T)
        return [StepSignal(row) for row in x]
    ev = _WnnEvaluator(H, _active_modes(H, W_spec), X, tol)
    return [FunctionSignal(lambda u, f=f: ev(u)[f], breaks=ev.breaks, name=f"wnn-output[{f}]")
            for f in range(H.widths[-1])]


# ---------------------------------------------------------------------------
# Instantiation and induction
# ---------------------------------------------------------------------------


class Instantiation(NamedTuple):
    params: GnnParams
    shift: ShiftOperator
    signal: np.ndarray


def instantiate_gnn(H: GnnParams, W: Graphon, X, n: int) -> Instantiation:
    """GNN on the deterministic graph of size ``n`` sharing ``H`` by reference."""
    X = [X] if isinstance(X, GraphonSignal) else list(X)
    S = sample_graph(W, n).with_normalization("adjacency-over-n")
    x = np.stack([sample_signal(s, n) for s in X])
    return Instantiation(H, S, x)


def induced_output(H: GnnParams, S: ShiftOperator, x, spec=None) -> list:
    """Step-signal lift of every output feature of ``gnn_forward``."""
    y = gnn_forward(H, S, x, spec)
    if y.ndim != 2:
        raise ValueError("induced_output takes a single (unbatched) feature stack")
    return [StepSignal(row) for row in y]


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def save_params(path, H: GnnParams) -> None:
    """Header lines then one line per filter ``l f g values...`` in row-major order."""
    family = H.family
    if family == "mixed" or family == "custom-table":
        raise ValueError(f"cannot serialize filter family {family!r}")
    with open(path, "w") as fh:
        fh.write(f"L {H.L}\n")
        fh.write("widths " + " ".join(map(str, H.widths)) + "\n")
        fh.write(f"activation {H.activation}\n")
        fh.write(f"family {family}\n")
        fh.write(f"linear_output {int(H.linear_output)}\n")
        for ell in range(H.L):
            layer = H.layers[ell]
            for f, g in np.ndindex(layer.shape[:2]):
                if family == "polynomial":
                    vals = layer[f, g]
                else:
                    p = layer[f, g].params
                    vals = (p["c"], p["plateau"], p["slope"])
                fh.write(f"{ell} {f} {g} " + " ".join(f"{v:.17g}" for v in vals) + "\n")


def load_params(path) -> GnnParams:
    header, rows = {}, []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0].isdigit():
                rows.append(parts)
            else:
                header[parts[0]] = parts[1:]
    try:
        widths = [int(w) for w in header["widths"]]
        family = header["family"][0]
        activation = header["activation"][0]
        linear = bool(int(header.get("linear_output", ["0"])[0]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing header field {exc}") from None
    L = len(widths) - 1
    if "L" in header and int(header["L"][0]) != L:
        raise ValueError(f"{path}: L does not match widths")
    entries = {}
    for r in rows:
        entries[(int(r[0]), int(r[1]), int(r[2]))] = [float(t) for t in r[3:]]
    layers = []
    for ell in range(L):
        shape = (widths[ell + 1], widths[ell])
        if family == "polynomial":
            k = len(entries[(ell, 0, 0)])
            arr = np.zeros(shape + (k,))
            for f, g in np.ndindex(shape):
                arr[f, g] = entries[(ell, f, g)]
        else:
            arr = np.empty(shape, dtype=object)
            for f, g in np.ndindex(shape):
                c, plateau, slope = entries[(ell, f, g)]
                arr[f, g] = make_banded_ramp(c, plateau, slope, strict=False)
        layers.append(arr)
    return GnnParams(tuple(layers), activation, linear)
