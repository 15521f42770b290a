"""Consensus regression: data, L1 training with ADAM, and train-small/test-large transfer.

Graph signals are batched as ``(F, n, B)``. The first layer's shifted inputs
``S^k x`` do not depend on the parameters, so they are computed once per
graph and dataset and reused by every epoch.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .gnn import ACTIVATIONS, GnnParams, random_polynomial_params
from .graphon import Graphon, ShiftOperator, sample_graph, sample_points, sbm_graphon

log = logging.getLogger(__name__)

FULL_SPLIT = (8400, 200, 200)
DEFAULT_SCALE = 0.25
INPUT_SIGMA = 10.0

# purposes for counter-based RNG streams
_DATA, _GRAPH, _INIT, _SHUFFLE, _TEST = range(5)


def stream(seed: int, purpose: int, *counters) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, counters)``; order of use never matters."""
    return np.random.default_rng([int(seed), purpose, *map(int, counters)])


class TrainingDivergedError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConsensusDataset:
    """Folded-normal inputs with the input mean replicated at every node as target.

    ``inputs`` and ``targets`` have shape ``(N, n)``; rows are ordered
    train, validation, test according to ``split``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    n: int
    seed: int
    split: tuple

    def part(self, name: str):
        a, b, _ = self.split
        sl = {"train": slice(0, a), "val": slice(a, a + b), "test": slice(a + b, None)}[name]
        return self.inputs[sl], self.targets[sl]


def scaled_split(scale: float = DEFAULT_SCALE) -> tuple:
    if scale <= 0:
        raise ValueError("split scale must be positive")
    return tuple(max(1, round(c * scale)) for c in FULL_SPLIT)


def gen_consensus(n: int, counts=None, seed: int = 0) -> ConsensusDataset:
    if n < 1:
        raise ValueError("n must be positive")
    counts = tuple(int(c) for c in (counts or scaled_split()))
    if len(counts) != 3 or min(counts) < 1:
        raise ValueError("counts must be three positive integers (train, val, test)")
    x = np.abs(stream(seed, _DATA, n).normal(0.0, INPUT_SIGMA, size=(sum(counts), n)))
    y = np.repeat(x.mean(axis=1, keepdims=True), n, axis=1)
    x.setflags(write=False)
    y.setflags(write=False)
    return ConsensusDataset(x, y, n, seed, counts)


def sample_graph_stochastic(W: Graphon, n: int, rng) -> ShiftOperator:
    """Bernoulli graph: edge ``{i, j}`` with probability ``W(u_i, u_j)``, no self loops."""
    u = sample_points(n)
    p = np.asarray(W(u[:, None], u[None, :]), dtype=float)
    upper = np.triu(rng.random((n, n)) < p, k=1).astype(float)
    return ShiftOperator(upper + upper.T)


def consensus_graph(n: int, sampling: str = "stochastic", seed: int = 0, realization: int = 0,
                    W: Optional[Graphon] = None) -> ShiftOperator:
    """SBM graph (two balanced communities, p=0.8, q=0.2) with adjacency-over-n scaling."""
    W = W or sbm_graphon(0.8, 0.2, 2)
    if sampling == "deterministic":
        S = sample_graph(W, n)
    elif sampling == "stochastic":
        S = sample_graph_stochastic(W, n, stream(seed, _GRAPH, n, realization))
    else:
        raise ValueError("graph sampling must be 'deterministic' or 'stochastic'")
    return S.with_normalization("adjacency-over-n")


# ---------------------------------------------------------------------------
# Losses and metrics
# ---------------------------------------------------------------------------


def l1_loss(yhat, y) -> float:
    """Sum of absolute node errors, averaged over the batch axis (last)."""
    yhat, y = np.asarray(yhat, float), np.asarray(y, float)
    return float(np.abs(yhat - y).sum() / y.shape[-1])


def l1_grad(yhat, y) -> np.ndarray:
    return np.sign(yhat - y) / y.shape[-1]


def rrmse(yhat, y) -> float:
    """Mean over samples of ``||yhat - y|| / ||y||``; samples along the last axis."""
    yhat, y = np.asarray(yhat, float), np.asarray(y, float)
    axes = tuple(range(y.ndim - 1))
    num = np.sqrt(np.sum((yhat - y) ** 2, axis=axes))
    den = np.sqrt(np.sum(y**2, axis=axes))
    if np.any(den == 0):
        raise ValueError("rRMSE is undefined for an all-zero target")
    return float(np.mean(num / den))


# ---------------------------------------------------------------------------
# Forward / backward for polynomial taps
# ---------------------------------------------------------------------------


def _require_polynomial(H: GnnParams):
    if not all(H.is_polynomial(ell) for ell in range(H.L)):
        raise ValueError("gradients are only available for polynomial-tap filters")


def _shifts(m, x, K):
    z = [x]
    for _ in range(K - 1):
        z.append(np.matmul(m, z[-1]))
    return np.stack(z)


def first_layer_shifts(H: GnnParams, S: ShiftOperator, x) -> np.ndarray:
    """``S^k x`` for ``k < K_1``; shape ``(K, F_0, n, B)``."""
    return _shifts(S.operator, _batch(x), H.layers[0].shape[2])


def _batch(x):
    x = np.asarray(x, dtype=float)
    return x[..., None] if x.ndim == 2 else x


def _forward(H, m, x, z0=None):
    cache = []
    for ell, taps in enumerate(H.layers):
        z = z0 if (ell == 0 and z0 is not None) else _shifts(m, x, taps.shape[2])
        pre = np.einsum("fgk,kgnb->fnb", taps, z)
        cache.append((z, pre))
        x = ACTIVATIONS[H.activation_for(ell)][0](pre)
    return x, cache


def _backward(H, m, cache, grad_out, need_input=False):
    grads = [None] * H.L
    delta = grad_out
    dx = None
    for ell in range(H.L - 1, -1, -1):
        taps = H.layers[ell]
        z, pre = cache[ell]
        dpre = delta * ACTIVATIONS[H.activation_for(ell)][1](pre)
        grads[ell] = np.einsum("fnb,kgnb->fgk", dpre, z)
        if ell == 0 and not need_input:
            break
        # adjoint of x -> sum_k h_k S^k x is sum_k h_k S^k (S symmetric), by Horner
        a = np.einsum("fgk,fnb->kgnb", taps, dpre)
        dx = a[-1]
        for k in range(taps.shape[2] - 2, -1, -1):
            dx = np.matmul(m, dx) + a[k]
        delta = dx
    return grads, dx


def gnn_backward(H: GnnParams, S: ShiftOperator, x, grad_out, return_input_grad=False):
    """Reverse-mode gradient of ``<grad_out, gnn_forward(H, S, x)>`` with respect to every tap.

    Returns a list of arrays shaped like ``H.layers`` (and the gradient with
    respect to ``x`` when ``return_input_grad``).
    """
    _require_polynomial(H)
    xb = _batch(x)
    if xb.shape[:2] != (H.widths[0], S.n):
        raise ValueError(f"input must have shape ({H.widths[0]}, {S.n}[, B])")
    g = np.asarray(grad_out, dtype=float)
    g = g[..., None] if g.ndim == 2 else g
    _, cache = _forward(H, S.operator, xb)
    grads, dx = _backward(H, S.operator, cache, g, need_input=return_input_grad)
    if return_input_grad:
        return grads, (dx if np.ndim(x) == 3 else dx[..., 0])
    return grads


# ---------------------------------------------------------------------------
# ADAM
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 40
    batch: Optional[int] = 64
    loss: str = "l1"
    seed: int = 0
    rrmse_selection: bool = True

    def __post_init__(self):
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise ValueError("learning rate must be finite and nonnegative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("ADAM decay factors must lie in (0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch is not None and self.batch < 1:
            raise ValueError("batch must be positive (or None for full batch)")
        if self.loss != "l1":
            raise ValueError("only the l1 loss is supported")


class AdamState(NamedTuple):
    m: np.ndarray
    v: np.ndarray


def adam_init(size: int) -> AdamState:
    return AdamState(np.zeros(size), np.zeros(size))


def adam_step(params, grads, state: AdamState, t: int, cfg: TrainConfig):
    """One bias-corrected ADAM update at step ``t >= 1``; returns ``(params, state)``."""
    params, grads = np.asarray(params, float), np.asarray(grads, float)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError("parameter, gradient and moment shapes must match")
    if t < 1:
        raise ValueError("ADAM steps are counted from 1")
    m = cfg.beta1 * state.m + (1 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1 - cfg.beta2) * grads**2
    mhat = m / (1 - cfg.beta1**t)
    vhat = v / (1 - cfg.beta2**t)
    return params - cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps), AdamState(m, v)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def consensus_params(rng, F: int, K: int, L: int) -> GnnParams:
    """``L`` ReLU graph convolutions of width ``F`` and a linear readout ``F -> 1``."""
    widths = [1] + [F] * L + [1]
    return random_polynomial_params(rng, widths, [K] * L + [1], "relu", linear_output=True)


@dataclass
class TrainResult:
    params: GnnParams
    log: list
    best_epoch: int
    notes: list = field(default_factory=list)


LOG_COLUMNS = ("epoch", "train_loss", "train_rrmse", "val_rrmse")


def _evaluate(H, m, x, y, z0=None):
    out, _ = _forward(H, m, x, z0)
    return out[0], y


def train_consensus(arch, n: int, cfg: TrainConfig = TrainConfig(), dataset=None,
                    S: Optional[ShiftOperator] = None, H0: Optional[GnnParams] = None,
                    trial: int = 0) -> TrainResult:
    """Train ``arch = (F, K, L)`` on the consensus task at size ``n`` with the L1 loss.

    The returned parameters are those with the smallest validation rRMSE
    (epoch 0 is the initialization) when ``cfg.rrmse_selection``, else the
    final ones.
    """
    F, K, L = (int(a) for a in arch)
    if min(F, K, L) < 1:
        raise ValueError("architecture (F, K, L) must be positive")
    ds = dataset or gen_consensus(n, seed=cfg.seed)
    if ds.n != n:
        raise ValueError("dataset size does not match n")
    S = S or consensus_graph(n, "deterministic")
    if S.n != n:
        raise ValueError("graph size does not match n")
    H = H0 or consensus_params(stream(cfg.seed, _INIT, trial), F, K, L)
    _require_polynomial(H)
    m = S.operator

    xtr, ytr = ds.part("train")
    xva, yva = ds.part("val")
    # (1, n, B) stacks; first-layer shifts are parameter-free
    Xtr, Ytr = xtr.T[None], ytr.T[None]
    Xva, Yva = xva.T[None], yva.T[None]
    ztr = _shifts(m, Xtr, H.layers[0].shape[2])
    zva = _shifts(m, Xva, H.layers[0].shape[2])

    def metrics(params, epoch):
        out_tr, _ = _forward(params, m, Xtr, ztr)
        out_va, _ = _forward(params, m, Xva, zva)
        loss = l1_loss(out_tr[0], Ytr[0])
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
        return {"epoch": epoch, "train_loss": loss, "train_rrmse": rrmse(out_tr[0], Ytr[0]),
                "val_rrmse": rrmse(out_va[0], Yva[0])}

    theta = H.flat()
    state = adam_init(theta.size)
    rows = [metrics(H, 0)]
    best, best_epoch = H, 0
    shuffle = stream(cfg.seed, _SHUFFLE, trial)
    ntr = xtr.shape[0]
    bsz = ntr if cfg.batch is None else min(cfg.batch, ntr)
    t = 0
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle.permutation(ntr)
        for start in range(0, ntr, bsz):
            idx = order[start:start + bsz]
            out, cache = _forward(H, m, Xtr[..., idx], ztr[..., idx])
            g_out = l1_grad(out, Ytr[..., idx])
            grads, _ = _backward(H, m, cache, g_out)
            t += 1
            theta, state = adam_step(theta, np.concatenate([g.ravel() for g in grads]),
                                     state, t, cfg)
            H = H.with_flat(theta)
        row = metrics(H, epoch)
        rows.append(row)
        log.debug("epoch %d train %.4g val %.4g", epoch, row["train_rrmse"], row["val_rrmse"])
        if row["val_rrmse"] < rows[best_epoch]["val_rrmse"]:
            best, best_epoch = H, epoch
    if not cfg.rrmse_selection:
        best, best_epoch = H, cfg.epochs
    return TrainResult(best, rows, best_epoch)


def evaluate_rrmse(H: GnnParams, S: ShiftOperator, x, y) -> float:
    """rRMSE of the scalar GNN output over samples stacked as rows of ``x``."""
    out, _ = _forward(H, S.operator, np.asarray(x, float).T[None])
    return rrmse(out[0], np.asarray(y, float).T)


class TransferResult(NamedTuple):
    rrmse_n: float
    rrmse_N: float
    relative_difference: float
    degenerate: bool


def transfer_eval(H: GnnParams, n_train: int, N_test: int, cfg: TrainConfig = TrainConfig(),
                  S_n: Optional[ShiftOperator] = None, S_N: Optional[ShiftOperator] = None,
                  test_count: Optional[int] = None, realization: int = 0) -> TransferResult:
    """``|rRMSE_N - rRMSE_n| / rRMSE_n`` for the same parameters on both graphs.

    Fresh test sets are drawn at both sizes. When ``rRMSE_n`` is zero the
    relative difference is undefined and reported as NaN, unless both errors
    are zero, which reports 0 and flags the case as degenerate.
    """
    if n_train < 2 or N_test < 2:
        raise ValueError("both sizes must be at least 2")
    count = test_count or scaled_split()[2]
    S_n = S_n or consensus_graph(n_train, "deterministic")
    S_N = S_N or consensus_graph(N_test, "deterministic")
    out = []
    for size, S in ((n_train, S_n), (N_test, S_N)):
        x = np.abs(stream(cfg.seed, _TEST, size, realization).normal(
            0.0, INPUT_SIGMA, size=(count, size)))
        y = np.repeat(x.mean(axis=1, keepdims=True), size, axis=1)
        out.append(evaluate_rrmse(H, S, x, y))
    r_n, r_N = out
    if r_n == 0:
        diff = 0.0 if r_N == 0 else float("nan")
        return TransferResult(r_n, r_N, diff, True)
    degenerate = bool(np.all([np.all(layer == 0) for layer in H.layers]))
    return TransferResult(r_n, r_N, abs(r_N - r_n) / r_n, degenerate)


# ---------------------------------------------------------------------------
# Realization sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trial:
    n: int
    graph: int
    data: int
    rrmse_n: float
    rrmse_N: float
    relative_difference: float


def run_trial(arch, n: int, N: int, graph: int, data: int, cfg: TrainConfig,
              scale: float = DEFAULT_SCALE, sampling: str = "stochastic") -> Trial:
    """Train on realization ``(graph, data)`` at size ``n`` and transfer to size ``N``.

    Graph realization ``graph`` fixes both the training graph and the large
    test graph; data realization ``data`` fixes the dataset and the
    initialization.
    """
    counts = scaled_split(scale)
    trial_cfg = replace(cfg, seed=int(np.random.SeedSequence([cfg.seed, graph, data])
                                      .generate_state(1)[0]))
    S_n = consensus_graph(n, sampling, cfg.seed, graph)
    S_N = consensus_graph(N, sampling, cfg.seed, graph)
    ds = gen_consensus(n, counts, trial_cfg.seed)
    res = train_consensus(arch, n, trial_cfg, dataset=ds, S=S_n)
    tr = transfer_eval(res.params, n, N, trial_cfg, S_n, S_N, counts[2])
    return Trial(n, graph, data, tr.rrmse_n, tr.rrmse_N, tr.relative_difference)


def consensus_sweep(arch, sizes, N: int, cfg: TrainConfig, graphs: int = 3, data: int = 3,
                    scale: float = DEFAULT_SCALE, sampling: str = "stochastic",
                    jobs: int = 1) -> list:
    """Every ``(n, graph, data)`` trial, sorted by those keys regardless of completion order."""
    keys = [(n, g, d) for n in sizes for g in range(graphs) for d in range(data)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_trial, arch, n, N, g, d, cfg, scale, sampling)
                       for n, g, d in keys]
            trials = [f.result() for f in futures]
    else:
        trials = [run_trial(arch, n, N, g, d, cfg, scale, sampling) for n, g, d in keys]
    return sorted(trials, key=lambda t: (t.n, t.graph, t.data))


def summarize(trials) -> dict:
    """Mean and standard deviation of the relative difference per size."""
    out = {}
    for n in sorted({t.n for t in trials}):
        vals = np.array([t.relative_difference for t in trials if t.n == n])
        out[n] = (float(np.nanmean(vals)), float(np.nanstd(vals)))
    return out


def trend_holds(means, slack: float = 0.1) -> bool:
    """Each mean below ``(1 + slack)`` times its predecessor and the last below the first."""
    means = list(means)
    return (all(b < (1 + slack) * a for a, b in zip(means, means[1:]))
            and means[-1] < means[0])
