"""scikit-learn style wrappers: a graph-filter transformer and a GNN regressor.

Rows of ``X`` are graph signals (one value per node). The graph is a
constructor parameter, so a fitted regressor transfers to another graph with
``set_params(shift=...)`` while keeping its learned taps.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .filters import FilterTaps, graph_convolve
from .graphon import ShiftOperator
from .training import ConsensusDataset, TrainConfig, evaluate_rrmse, train_consensus, _forward


def _as_shift(shift, normalization):
    if shift is None:
        raise ValueError("a shift operator (graph) is required")
    if isinstance(shift, ShiftOperator):
        return shift if shift.normalization == normalization else shift.with_normalization(normalization)
    return ShiftOperator(np.asarray(shift, dtype=float), normalization)


def _check_signals(X, S):
    X = check_array(X, dtype=float)
    if X.shape[1] != S.n:
        raise ValueError(f"signals have {X.shape[1]} nodes, the graph has {S.n}")
    return X


class GraphFilterTransformer(TransformerMixin, BaseEstimator):
    """Applies ``sum_k h_k S^k x`` to every row of ``X``."""

    def __init__(self, shift=None, taps=(0.0, 1.0), normalization="adjacency-over-n"):
        self.shift = shift
        self.taps = taps
        self.normalization = normalization

    def fit(self, X, y=None):
        S = _as_shift(self.shift, self.normalization)
        X = _check_signals(X, S)
        self.filter_ = FilterTaps(self.taps)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "filter_")
        S = _as_shift(self.shift, self.normalization)
        X = _check_signals(X, S)
        return graph_convolve(self.filter_, S, X.T).T


class GNNRegressor(RegressorMixin, BaseEstimator):
    """Node-level GNN regressor trained with the L1 loss and ADAM.

    ``layers`` ReLU graph convolutions of width ``features`` with ``taps``
    taps each, followed by a linear readout. The last
    ``validation_fraction`` of the training rows selects the epoch with the
    smallest validation rRMSE.

    Unlike most scikit-learn estimators, ``predict`` accepts any number of
    nodes as long as it matches the current ``shift``; that is the point of
    transferring between graph sizes.
    """

    def __init__(self, shift=None, features=8, taps=4, layers=1, lr=1e-3, beta1=0.9,
                 beta2=0.999, epochs=40, batch_size=64, validation_fraction=0.1,
                 normalization="adjacency-over-n", random_state=0):
        self.shift = shift
        self.features = features
        self.taps = taps
        self.layers = layers
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epochs = epochs
        self.batch_size = batch_size
        self.validation_fraction = validation_fraction
        self.normalization = normalization
        self.random_state = random_state

    def _config(self):
        return TrainConfig(lr=self.lr, beta1=self.beta1, beta2=self.beta2, epochs=self.epochs,
                           batch=self.batch_size, seed=int(self.random_state or 0))

    def fit(self, X, y):
        S = _as_shift(self.shift, self.normalization)
        X = _check_signals(X, S)
        y = check_array(y, dtype=float)
        if y.shape != X.shape:
            raise ValueError("targets must have one value per node of every input signal")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")
        n_val = max(1, int(round(self.validation_fraction * len(X))))
        if n_val >= len(X):
            raise ValueError("need at least two samples to hold out a validation set")
        ds = ConsensusDataset(X, y, S.n, int(self.random_state or 0), (len(X) - n_val, n_val, 0))
        res = train_consensus((self.features, self.taps, self.layers), S.n, self._config(),
                              dataset=ds, S=S)
        self.params_ = res.params
        self.log_ = res.log
        self.best_epoch_ = res.best_epoch
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        S = _as_shift(self.shift, self.normalization)
        X = _check_signals(X, S)
        out, _ = _forward(self.params_, S.operator, X.T[None])
        return out[0].T

    def rrmse(self, X, y) -> float:
        check_is_fitted(self, "params_")
        S = _as_shift(self.shift, self.normalization)
        X = _check_signals(X, S)
        return evaluate_rrmse(self.params_, S, X, check_array(y, dtype=float))
