import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphon_nn.filters import (
    FilterTaps,
    filter_constants,
    graph_convolve,
    graph_convolve_spectral,
    graphon_convolve,
    make_banded_ramp,
    polynomial_filter,
)
from graphon_nn.graphon import (
    ShiftOperator,
    StepSignal,
    constant_graphon,
    graphon_family,
    induce_signal,
    l2_norm,
    linear_signal,
    product_graphon,
    signal_family,
)
from graphon_nn.spectral import decompose_graph, decompose_graphon
from graphon_nn.transferability import theorem4_bound


def symmetric(rng, n):
    a = rng.random((n, n))
    return np.triu(a) + np.triu(a, 1).T


def random_case(seed, max_n=64, max_k=6):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(1, max_k + 1))
    S = ShiftOperator(symmetric(rng, n), "adjacency-over-n")
    return rng, S, rng.normal(size=k), rng.normal(size=n)


seeds = st.integers(0, 2**32 - 1)


# --- graph convolution ----------------------------------------------------


def test_convolution_examples():
    rng = np.random.default_rng(0)
    S = ShiftOperator(symmetric(rng, 5))
    x = rng.normal(size=5)
    assert np.array_equal(graph_convolve(FilterTaps([1.0]), S, x), x)
    assert np.allclose(graph_convolve(FilterTaps([0.0, 1.0]), S, x), S.matrix @ x)
    swap = ShiftOperator([[0.0, 1.0], [1.0, 0.0]])
    assert np.array_equal(graph_convolve(FilterTaps([1.0, 1.0]), swap, [1.0, 2.0]), [3.0, 3.0])


def test_dimension_mismatch():
    S = ShiftOperator(np.eye(3))
    with pytest.raises(ValueError):
        graph_convolve(FilterTaps([1.0]), S, np.ones(4))
    with pytest.raises(ValueError):
        graph_convolve_spectral(polynomial_filter([1.0]), decompose_graph(S), np.ones(2))


@pytest.mark.parametrize("bad", [[], [1.0, np.inf]])
def test_taps_validated(bad):
    with pytest.raises(ValueError):
        FilterTaps(bad)


@given(seed=seeds)
def test_spectral_equivalence(seed):
    _, S, h, x = random_case(seed)
    a = graph_convolve(FilterTaps(h), S, x)
    b = graph_convolve_spectral(polynomial_filter(h), decompose_graph(S), x)
    assert np.max(np.abs(a - b)) <= 1e-8


def test_spectral_trivial_filters():
    _, S, _, x = random_case(3)
    spec = decompose_graph(S)
    assert np.allclose(graph_convolve_spectral(polynomial_filter([1.0]), spec, x), x, atol=1e-10)
    zero = make_banded_ramp(1.0, 0.0, 0.0)
    assert np.all(graph_convolve_spectral(zero, spec, x) == 0)


@given(seed=seeds, a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linearity(seed, a, b):
    rng, S, h, x = random_case(seed)
    y = rng.normal(size=x.size)
    taps = FilterTaps(h)
    lhs = graph_convolve(taps, S, a * x + b * y)
    rhs = a * graph_convolve(taps, S, x) + b * graph_convolve(taps, S, y)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))


@given(seed=seeds)
def test_shift_commutation(seed):
    _, S, h, x = random_case(seed)
    taps = FilterTaps(h)
    m = S.operator
    assert np.max(np.abs(graph_convolve(taps, S, m @ x) - m @ graph_convolve(taps, S, x))) <= 1e-9


def test_batched_signals():
    rng, S, h, _ = random_case(9)
    X = rng.normal(size=(S.n, 4))
    out = graph_convolve(FilterTaps(h), S, X)
    for j in range(4):
        assert np.allclose(out[:, j], graph_convolve(FilterTaps(h), S, X[:, j]))


# --- banded ramps ---------------------------------------------------------


def test_ramp_examples():
    f = make_banded_ramp(0.2, 0.0, 1.0)
    assert np.allclose(f([0.1, 0.5, 1.0, -0.5]), [0.0, 0.3, 0.8, 0.3])
    g = make_banded_ramp(0.2, 0.5, 0.0)
    assert np.all(g(np.linspace(-1, 1, 101)) == 0.5)
    with pytest.raises(ValueError):
        make_banded_ramp(0.99, 0.0, 100.0)


def test_ramp_is_constant_in_band_and_lipschitz():
    rng = np.random.default_rng(4)
    lam = np.linspace(-1, 1, 4096)
    for _ in range(50):
        c = rng.uniform(0.01, 0.9)
        plateau, end = rng.uniform(-0.95, 0.95, size=2)
        f = make_banded_ramp(c, plateau, (end - plateau) / (1 - c))
        r = f(lam)
        assert np.all(r[np.abs(lam) < c] == plateau)
        assert np.max(np.abs(r)) <= 1 + 1e-12
        assert np.max(np.abs(np.diff(r)) / np.diff(lam)) <= f.lipschitz + 1e-9


def test_ramp_parameter_checks():
    for c in (0.0, 1.5):
        with pytest.raises(ValueError):
            make_banded_ramp(c, 0.0, 0.0)
    with pytest.raises(ValueError):
        make_banded_ramp(0.5, 1.5, 0.0)
    f = make_banded_ramp(0.5, 0.9, 1.0, strict=False)
    assert f(1.0) == 1.0


def test_filter_constants_examples():
    a = filter_constants(polynomial_filter([0.0, 1.0]))
    assert a.lipschitz == 1 and a.sup_abs == 1 and a.c_effective == 0 and a.certified
    b = filter_constants(make_banded_ramp(0.2, 0.0, 1.0))
    assert b.lipschitz == 1 and b.c_effective == 0.2
    c = filter_constants(polynomial_filter([0.5]))
    assert c.lipschitz == 0 and c.sup_abs == 0.5 and c.c_effective == 1
    with pytest.raises(ValueError):
        filter_constants(polynomial_filter([1.0]), grid_m=100)


def test_polynomial_lipschitz_certificate_dominates_grid():
    rng = np.random.default_rng(8)
    for _ in range(100):
        k = filter_constants(polynomial_filter(rng.normal(size=rng.integers(1, 7))))
        assert k.lipschitz_grid <= k.lipschitz + 1e-9


# --- graphon convolution --------------------------------------------------


def test_graphon_zero_filter():
    spec = decompose_graphon(graphon_family("gaussian"), 256)
    Y = graphon_convolve(make_banded_ramp(1.0, 0.0, 0.0), spec, linear_signal())
    assert np.all(Y(np.linspace(0, 1, 17)) == 0)


def test_rank_one_convolution():
    spec = decompose_graphon(product_graphon())
    identity = polynomial_filter([0.0, 1.0])
    Y = graphon_convolve(identity, spec, linear_signal())
    assert abs(float(Y(np.array([0.9]))[0]) - 0.3) <= 1e-10


def test_constant_graphon_convolution():
    spec = decompose_graphon(constant_graphon(0.35))
    Y = graphon_convolve(polynomial_filter([0.0, 1.0]), spec, signal_family("constant"))
    assert np.allclose(Y(np.linspace(0, 1, 9)), 0.35, atol=1e-12)


def test_step_spectrum_with_step_signal_matches_graph():
    rng = np.random.default_rng(12)
    m = symmetric(rng, 12)
    S = ShiftOperator(m, "adjacency-over-n")
    spec = decompose_graph(S)
    f = make_banded_ramp(0.1, 0.3, -0.5)
    x = rng.normal(size=12)
    Y = graphon_convolve(f, spec, induce_signal(x))
    assert isinstance(Y, StepSignal)
    assert np.allclose(Y.values, graph_convolve_spectral(f, spec, x), atol=1e-12)


@pytest.mark.parametrize("family", ["product", "gaussian", "min"])
def test_non_amplifying(family):
    spec = decompose_graphon(graphon_family(family), 512)
    rng = np.random.default_rng(2)
    X = signal_family("sine")
    for _ in range(3):
        plateau, end = rng.uniform(-0.95, 0.95, size=2)
        f = make_banded_ramp(0.05, plateau, (end - plateau) / 0.95)
        assert l2_norm(graphon_convolve(f, spec, X)) <= l2_norm(X) + 1e-10


@given(seed=seeds)
def test_graph_non_amplifying(seed):
    rng, S, _, x = random_case(seed)
    plateau, end = rng.uniform(-1, 1, size=2)
    f = make_banded_ramp(0.3, plateau, (end - plateau) / 0.7, strict=False)
    y = graph_convolve_spectral(f, decompose_graph(S), x)
    assert np.linalg.norm(y) <= np.linalg.norm(x) * (1 + 1e-10) + 1e-12


@pytest.mark.parametrize("family", ["product", "gaussian", "min"])
@pytest.mark.parametrize("n", [16, 64, 256])
def test_step_input_convolution_bound(family, n):
    W = graphon_family(family)
    W_spec = decompose_graphon(W, 512)
    f = make_banded_ramp(0.05, 0.2, 0.5)
    r = theorem4_bound(f, W, linear_signal(), n, step_input=True, W_spec=W_spec)
    bound = math.sqrt(W.lipschitz) * (f.lipschitz + (
        math.pi * r.constants["n_c"] / r.constants["delta_c"] if r.constants["n_c"] else 0.0)) \
        / math.sqrt(n) * r.constants["norm_X"]
    assert math.isclose(r.bound_value, bound, rel_tol=1e-12)
    assert r.satisfied
