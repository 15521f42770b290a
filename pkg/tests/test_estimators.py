import numpy as np
import pytest
from sklearn.base import clone

from graphon_nn.estimators import GNNRegressor, GraphFilterTransformer
from graphon_nn.filters import FilterTaps, graph_convolve
from graphon_nn.graphon import ShiftOperator
from graphon_nn.training import consensus_graph, gen_consensus, rrmse


def small_data(n, count, seed=0):
    ds = gen_consensus(n, (count, 1, 1), seed)
    return ds.inputs[:count], ds.targets[:count]


def test_transformer_matches_graph_convolution():
    rng = np.random.default_rng(0)
    a = rng.random((6, 6))
    a = a + a.T
    X = rng.normal(size=(5, 6))
    t = GraphFilterTransformer(shift=a, taps=(0.5, 1.0, -0.2)).fit(X)
    S = ShiftOperator(a, "adjacency-over-n")
    expect = graph_convolve(FilterTaps([0.5, 1.0, -0.2]), S, X.T).T
    assert np.allclose(t.transform(X), expect, atol=1e-12)
    assert np.allclose(t.fit_transform(X), expect, atol=1e-12)


def test_transformer_checks():
    t = GraphFilterTransformer(shift=np.eye(3))
    with pytest.raises(Exception):
        t.transform(np.ones((2, 3)))
    with pytest.raises(ValueError):
        t.fit(np.ones((2, 4)))
    with pytest.raises(ValueError):
        GraphFilterTransformer().fit(np.ones((2, 3)))


def test_params_and_clone():
    S = consensus_graph(20, "deterministic")
    est = GNNRegressor(shift=S, features=3, taps=2, epochs=2)
    p = est.get_params()
    assert p["features"] == 3 and p["taps"] == 2 and p["shift"] is S
    c = clone(est)
    assert c.get_params()["epochs"] == 2 and not hasattr(c, "params_")
    est.set_params(lr=0.01)
    assert est.lr == 0.01


def test_fit_predict_and_transfer():
    n, N = 20, 60
    X, y = small_data(n, 120)
    est = GNNRegressor(shift=consensus_graph(n, "deterministic"), features=4, taps=3,
                       epochs=5, batch_size=16, lr=1e-2).fit(X, y)
    pred = est.predict(X)
    assert pred.shape == X.shape
    assert est.rrmse(X, y) == pytest.approx(rrmse(pred.T, y.T))
    assert len(est.log_) == 6
    # refitting with the same seed is reproducible
    again = clone(est).fit(X, y)
    assert np.array_equal(again.predict(X), pred)
    # transfer to a larger graph keeps the taps
    taps = [t.copy() for t in est.params_.layers]
    est.set_params(shift=consensus_graph(N, "deterministic"))
    XN, yN = small_data(N, 10, seed=1)
    assert est.predict(XN).shape == (10, N)
    assert np.isfinite(est.rrmse(XN, yN))
    assert all(np.array_equal(a, b) for a, b in zip(taps, est.params_.layers))


def test_regressor_validation():
    S = consensus_graph(10, "deterministic")
    X, y = small_data(10, 20)
    with pytest.raises(ValueError):
        GNNRegressor(shift=S, epochs=1).fit(X, y[:, :5])
    with pytest.raises(ValueError):
        GNNRegressor(shift=S, epochs=1, validation_fraction=1.5).fit(X, y)
    with pytest.raises(ValueError):
        GNNRegressor(shift=S, epochs=1).fit(X[:1], y[:1])
    with pytest.raises(ValueError):
        GNNRegressor(shift=consensus_graph(12, "deterministic"), epochs=1).fit(X, y)
    with pytest.raises(Exception):
        GNNRegressor(shift=S).predict(X)
