"""Eigendecompositions of shift operators and graphon operators.

Eigenvalues are indexed over the nonzero integers: nonnegative eigenvalues
take indices 1, 2, ... in decreasing order (zeros last), negative ones take
-1, -2, ... in decreasing order of magnitude. Values within ``ZERO_TOL`` of
zero count as zero.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graphon import (
    Graphon,
    GraphonSignal,
    ShiftOperator,
    StepSignal,
    _locate,
    grid_edges,
)
from .quadrature import integrate, merge_breaks

log = logging.getLogger(__name__)

ZERO_TOL = 1e-10
MULTIPLICITY_TOL = 1e-10
NYSTROM_ORDER = 4
DEFAULT_TRUNCATION = 1024
DRIFT_TOL = 1e-4
NYSTROM_FLOOR = 1e-8
PROJECT_DEPTH = 12
_EVAL_CHUNK = 4096


class EmptyBandError(ValueError):
    """No induced eigenvalue reaches the band threshold."""


class DegenerateSpectrumError(ValueError):
    """The cross-spectrum eigengap vanishes and the bounds diverge."""


# ---------------------------------------------------------------------------
# Eigenfunction bases
# ---------------------------------------------------------------------------


class StepBasis:
    """Eigenfunctions constant on the cells of ``edges``.

    ``cell_values[k, i]`` is the value of eigenfunction ``i`` on cell ``k``.
    """

    def __init__(self, cell_values, edges):
        self.cell_values = np.asarray(cell_values, dtype=float)
        self.edges = np.asarray(edges, dtype=float)
        self.breaks = self.edges

    @property
    def rank(self):
        return self.cell_values.shape[1]

    def evaluate(self, u):
        return self.cell_values[_locate(self.edges, np.asarray(u, dtype=float))]

    def subset(self, cols) -> "StepBasis":
        return StepBasis(self.cell_values[:, cols], self.edges)

    def project(self, func, breaks=None, tol=1e-12):
        """Inner products ``<f_g, phi_i>`` for a vector-valued integrand.

        ``func(u)`` returns shape ``(G, len(u))``; the result has shape
        ``(G, rank)``.
        """
        return integrate(lambda u: func(u)[:, None, :] * self.evaluate(u).T[None],
                         merge_breaks(self.breaks, breaks), tol=tol)

    def inner(self, X: GraphonSignal):
        if isinstance(X, StepSignal):
            br = merge_breaks(self.edges, X.edges)
            mid = 0.5 * (br[:-1] + br[1:])
            if len(br) == len(self.edges) and np.array_equal(br, self.edges):
                return self.cell_values.T @ (X.values * np.diff(br))
            return self.evaluate(mid).T @ (X(mid) * np.diff(br))
        return self.project(lambda u: X(u)[None], X.breaks)[0]


class FunctionBasis:
    """Eigenfunctions given by a vectorized evaluator.

    ``evaluator(u, cols)`` returns the eigenfunctions ``cols`` at the points
    ``u`` with shape ``(len(u), len(cols))``.
    """

    def __init__(self, evaluator, rank, breaks=None, cols=None):
        self._evaluator = evaluator
        self._cols = np.arange(rank) if cols is None else np.asarray(cols, dtype=int)
        self.breaks = merge_breaks(breaks)

    @property
    def rank(self):
        return len(self._cols)

    def subset(self, cols) -> "FunctionBasis":
        return FunctionBasis(self._evaluator, 0, self.breaks, self._cols[cols])

    def _eval(self, u):
        return np.asarray(self._evaluator(u, self._cols), dtype=float).reshape(u.size, self.rank)

    def evaluate(self, u):
        u = np.asarray(u, dtype=float).ravel()
        if u.size <= _EVAL_CHUNK:
            return self._eval(u)
        return np.concatenate([self._eval(u[s:s + _EVAL_CHUNK])
                               for s in range(0, u.size, _EVAL_CHUNK)])

    def project(self, func, breaks=None, tol=1e-12):
        return integrate(lambda u: func(u)[:, None, :] * self.evaluate(u).T[None],
                         merge_breaks(self.breaks, breaks), tol=tol, max_depth=PROJECT_DEPTH)

    def inner(self, X: GraphonSignal):
        return self.project(lambda u: X(u)[None], X.breaks)[0]


# ---------------------------------------------------------------------------
# Decompositions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues in index order with matched eigenvectors/eigenfunctions.

    ``complete`` is True when the eigenpairs span the whole range of the
    operator's action on step signals of its grid (graph and induced
    decompositions); analytic decompositions keep only nonzero eigenpairs and
    treat every index beyond them as a zero eigenvalue.
    """

    eigenvalues: np.ndarray
    indices: np.ndarray
    basis: object
    source: str
    n: Optional[int] = None
    vectors: Optional[np.ndarray] = None
    complete: bool = True
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    def value(self, i: int) -> float:
        """Eigenvalue with index ``i``; indices beyond the stored ones are 0."""
        hit = np.flatnonzero(self.indices == i)
        return float(self.eigenvalues[hit[0]]) if hit.size else 0.0

    @property
    def positive(self) -> np.ndarray:
        return self.eigenvalues[self.indices > 0]

    @property
    def negative(self) -> np.ndarray:
        return self.eigenvalues[self.indices < 0]

    def top(self, k: int):
        """First ``k`` eigenvalues on each side, counted with multiplicity, zero-filled."""
        pos = np.zeros(k)
        neg = np.zeros(k)
        p, q = self.positive[:k], self.negative[:k]
        pos[:len(p)] = p
        neg[:len(q)] = q
        return pos, neg

    def distinct(self):
        """Distinct positive-index and negative-index eigenvalues (multiplicities collapsed)."""
        return _collapse(self.positive), _collapse(self.negative)

    def reconstruct(self) -> np.ndarray:
        if self.vectors is None:
            raise ValueError("reconstruction needs eigenvectors of a finite operator")
        return (self.vectors * self.eigenvalues) @ self.vectors.T

    def eigenfunctions(self, u) -> np.ndarray:
        return self.basis.evaluate(u)

    def restrict(self, mask) -> "SpectralDecomposition":
        """Keep only the eigenpairs selected by ``mask``."""
        cols = np.flatnonzero(mask)
        return SpectralDecomposition(
            eigenvalues=self.eigenvalues[cols], indices=self.indices[cols],
            basis=self.basis.subset(cols), source=self.source, n=self.n,
            vectors=None if self.vectors is None else self.vectors[:, cols],
            complete=False, diagnostics=dict(self.diagnostics),
        )


def _collapse(vals):
    vals = np.where(np.abs(vals) <= ZERO_TOL, 0.0, vals)
    out = []
    for v in vals:
        if not out or abs(v - out[-1]) > MULTIPLICITY_TOL:
            out.append(float(v))
    return np.array(out)


def _index_order(w):
    pos = np.flatnonzero(w > ZERO_TOL)
    zero = np.flatnonzero(np.abs(w) <= ZERO_TOL)
    neg = np.flatnonzero(w < -ZERO_TOL)
    pos = pos[np.argsort(-w[pos], kind="stable")]
    neg = neg[np.argsort(w[neg], kind="stable")]
    order = np.concatenate([pos, zero, neg])
    idx = np.concatenate([np.arange(1, len(pos) + len(zero) + 1), -np.arange(1, len(neg) + 1)])
    return order, idx.astype(int)


def _fix_signs(vecs):
    j = np.argmax(np.abs(vecs), axis=0)
    flip = vecs[j, np.arange(vecs.shape[1])] < 0
    vecs[:, flip] *= -1.0
    return vecs


def decompose_graph(S: ShiftOperator) -> SpectralDecomposition:
    """Full dense eigendecomposition of the operator applied by ``S``.

    With ``adjacency-over-n`` normalization the eigenvalues are those of
    ``S / n``, i.e. the spectrum of the induced graphon operator, and the
    basis evaluates the eigenvectors as sqrt(n)-scaled step functions.
    Signs are fixed so the largest-magnitude entry of each eigenvector is
    positive (first such entry on ties).
    """
    m = S.operator
    if not np.all(np.isfinite(m)):
        raise ValueError("shift operator has non-finite entries")
    w, v = np.linalg.eigh(m)
    order, idx = _index_order(w)
    w, v = w[order], _fix_signs(v[:, order])
    n = S.n
    return SpectralDecomposition(
        eigenvalues=w, indices=idx, vectors=v, n=n,
        basis=StepBasis(math.sqrt(n) * v, grid_edges(n)),
        source=f"graph(n={n}, {S.normalization})",
    )


def _block_spectrum(W: Graphon) -> SpectralDecomposition:
    # T_W on block-constant functions is D^{1/2} B D^{1/2} in the orthonormal block basis
    prop = np.diff(W.edges)
    root = np.sqrt(prop)
    w, y = np.linalg.eigh(root[:, None] * W.matrix * root[None, :])
    keep = np.abs(w) > ZERO_TOL
    w, y = w[keep], y[:, keep]
    order, idx = _index_order(w)
    w, y = w[order], _fix_signs(y[:, order])
    cells = y / root[:, None]
    return SpectralDecomposition(
        eigenvalues=w, indices=idx, basis=StepBasis(cells, W.edges),
        source=f"sbm(rank={len(w)})", complete=False,
    )


def gauss_nodes(m: int, breaks=None):
    """Composite Gauss-Legendre nodes and weights with about ``m`` points."""
    x, wq = np.polynomial.legendre.leggauss(NYSTROM_ORDER)
    x, wq = 0.5 * (x + 1), 0.5 * wq
    cells = max(m // NYSTROM_ORDER, 1)
    br = merge_breaks(np.linspace(0, 1, cells + 1), breaks)
    a, h = br[:-1], np.diff(br)
    t = (a[:, None] + h[:, None] * x).ravel()
    w = (h[:, None] * wq).ravel()
    return t, w


def _nystrom(W: Graphon, m: int) -> SpectralDecomposition:
    t, wt = gauss_nodes(m, W.breaks)
    sw = np.sqrt(wt)
    a = sw[:, None] * np.asarray(W(t[:, None], t[None, :]), dtype=float) * sw[None, :]
    a = 0.5 * (a + a.T)
    lam, y = np.linalg.eigh(a)
    # the extension divides by lam, so tiny eigenvalues amplify roundoff
    keep = np.abs(lam) > max(ZERO_TOL, NYSTROM_FLOOR * np.max(np.abs(lam)))
    lam, y = lam[keep], y[:, keep]
    order, idx = _index_order(lam)
    lam, y = lam[order], _fix_signs(y[:, order])
    # Nystrom extension: phi_i(u) = (1 / lam_i) sum_j w_j W(u, t_j) phi_i(t_j)
    coef = (sw[:, None] * y) / lam[None, :]

    def evaluator(u, cols):
        return np.asarray(W(u[:, None], t[None, :]), dtype=float) @ coef[:, cols]

    return SpectralDecomposition(
        eigenvalues=lam, indices=idx,
        basis=FunctionBasis(evaluator, len(lam), W.breaks),
        source=f"analytic-graphon(truncation m={len(t)})", complete=False,
    )


def decompose_graphon(W: Graphon, truncation_m: int = DEFAULT_TRUNCATION,
                      check_c: Optional[float] = None) -> SpectralDecomposition:
    """Spectrum of the graphon operator ``T_W``.

    Step graphons are decomposed exactly through their step matrix with
    ``adjacency-over-n`` normalization; block models and kernels with a
    closed-form spectrum use it directly. Other analytic kernels are
    discretized by the Nystrom method on about ``truncation_m`` composite
    Gauss-Legendre nodes; eigenvalues converge as ``truncation_m`` grows.
    When ``check_c`` is given, the decomposition is repeated at twice the
    resolution and the largest drift among eigenvalues with ``|lam| >=
    check_c`` is stored in ``diagnostics["drift"]``.
    """
    if int(truncation_m) != truncation_m or truncation_m < 2:
        raise ValueError("truncation_m must be an integer >= 2")
    if W.kind == "step":
        spec = decompose_graph(ShiftOperator(W.matrix, "adjacency-over-n"))
        return SpectralDecomposition(
            eigenvalues=spec.eigenvalues, indices=spec.indices, basis=spec.basis,
            vectors=spec.vectors, n=spec.n, source=f"induced-graphon(n={spec.n})",
        )
    if W.kind == "sbm":
        return _block_spectrum(W)
    if W.spectrum is not None:
        vals, funcs = W.spectrum
        vals = np.asarray(vals, dtype=float)
        order, idx = _index_order(vals)
        return SpectralDecomposition(
            eigenvalues=vals[order], indices=idx,
            basis=FunctionBasis(lambda u, cols: funcs(u)[:, order[cols]], len(vals), W.breaks),
            source=f"analytic-graphon(rank={len(vals)})", complete=False,
        )
    spec = _nystrom(W, int(truncation_m))
    if check_c is not None:
        finer = _nystrom(W, 2 * int(truncation_m))
        drift = 0.0
        for sign in (1, -1):
            a = spec.eigenvalues[np.sign(spec.indices) == sign]
            b = finer.eigenvalues[np.sign(finer.indices) == sign]
            k = int(np.sum(np.abs(a) >= check_c))
            if k:
                bb = np.zeros(k)
                bb[:min(k, len(b))] = b[:k]
                drift = max(drift, float(np.max(np.abs(a[:k] - bb))))
        spec.diagnostics["drift"] = drift
        if drift >= DRIFT_TOL:
            log.warning("Nystrom eigenvalue drift %.3g exceeds %.0e at m=%d",
                        drift, DRIFT_TOL, truncation_m)
    return spec


# ---------------------------------------------------------------------------
# Band constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandConstants:
    c: float
    n_c: int
    delta_c: float
    indices: tuple
    notes: tuple = ()


def _lam(seq, i):
    k = abs(i) - 1
    return float(seq[k]) if k < len(seq) else 0.0


def band_constants(W_spec: SpectralDecomposition, Wn_spec: SpectralDecomposition,
                   c: float) -> BandConstants:
    """Band set ``C``, its size ``n_c`` and the cross-spectrum eigengap ``delta_c``.

    ``C`` holds the distinct-eigenvalue indices ``i`` of ``Wn_spec`` with
    ``|lam^n_i| >= c``. ``delta_c`` is the minimum over ``i`` in ``C`` of
    ``|lam_i - lam^n_{i+sgn i}|`` and ``|lam_{i+sgn i} - lam^n_i|`` together
    with ``|lam_1 - lam^n_{-1}|`` and ``|lam^n_1 - lam_{-1}|``. Indices past
    the end of a spectrum read as zero eigenvalues; the two ``lam_{-1}``
    terms are dropped when either spectrum has no negative eigenvalue.
    """
    if not 0 < c <= 1:
        raise ValueError("band threshold c must lie in (0, 1]")
    wp, wn = W_spec.distinct()
    np_, nn = Wn_spec.distinct()
    band = [i + 1 for i, v in enumerate(np_) if abs(v) >= c]
    band += [-(i + 1) for i, v in enumerate(nn) if abs(v) >= c]
    if not band:
        raise EmptyBandError(f"empty band: no induced eigenvalue has |lambda| >= {c}")
    terms = []
    for i in band:
        s = 1 if i > 0 else -1
        seq_w, seq_n = (wp, np_) if i > 0 else (wn, nn)
        terms.append(abs(_lam(seq_w, i) - _lam(seq_n, i + s)))
        terms.append(abs(_lam(seq_w, i + s) - _lam(seq_n, i)))
    notes = []
    if len(wn) and len(nn):
        terms.append(abs(_lam(wp, 1) - _lam(nn, -1)))
        terms.append(abs(_lam(np_, 1) - _lam(wn, -1)))
    else:
        notes.append("lambda_{-1} cross terms omitted: a spectrum has no negative eigenvalue")
    delta = min(terms)
    if delta <= 1e-14:
        raise DegenerateSpectrumError(
            f"degenerate spectrum: delta_c = {delta:.3g} at c = {c}; the bound diverges")
    return BandConstants(c=float(c), n_c=len(band), delta_c=float(delta),
                         indices=tuple(band), notes=tuple(notes))


# ---------------------------------------------------------------------------
# Eigenvalue perturbation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationReport:
    max_difference: float
    distance: float
    k: int
    passed: bool


def eigenvalue_perturbation_check(W1: Graphon, W2: Graphon, k: int,
                                  truncation_m: int = DEFAULT_TRUNCATION,
                                  tol: float = 1e-8) -> PerturbationReport:
    """Compare the top-``k`` eigenvalues of both signs against ``||W1 - W2||``."""
    from .graphon import graphon_l2_distance

    if k < 1:
        raise ValueError("k must be positive")
    p1, n1 = decompose_graphon(W1, truncation_m).top(k)
    p2, n2 = decompose_graphon(W2, truncation_m).top(k)
    diff = float(max(np.max(np.abs(p1 - p2)), np.max(np.abs(n1 - n2))))
    dist = graphon_l2_distance(W1, W2)
    return PerturbationReport(diff, dist, k, diff <= dist + tol)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

SPECTRA_COLUMNS = ("index", "eigenvalue", "source", "n")


def spectrum_rows(spec: SpectralDecomposition, n=None, limit=None):
    rows = []
    for i, v in zip(spec.indices, spec.eigenvalues):
        if limit is not None and abs(i) > limit:
            continue
        rows.append({"index": int(i), "eigenvalue": f"{v:.17g}", "source": spec.source,
                     "n": "" if n is None else n})
    return rows


def write_spectra_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SPECTRA_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
