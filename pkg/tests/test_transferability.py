import math

import numpy as np
import pytest

from graphon_nn.filters import make_banded_ramp
from graphon_nn.gnn import GnnParams, random_banded_params
from graphon_nn.graphon import (
    constant_graphon,
    graphon_family,
    linear_signal,
    product_graphon,
    sbm_graphon,
    signal_family,
)
from graphon_nn.spectral import decompose_graphon
from graphon_nn.transferability import (
    BOUNDS_COLUMNS,
    AssumptionError,
    _SizeCache,
    fit_rate,
    theorem1_bound,
    theorem1_value,
    theorem2_bound,
    theorem2_value,
    theorem4_bound,
    theorem4_value,
    transfer_sweep,
    write_bounds_csv,
)
from oracles import bound_t1, bound_t2


@pytest.fixture(scope="module")
def specs():
    return {name: decompose_graphon(graphon_family(name), 1024)
            for name in ("product", "gaussian", "min")}


def ramp_net(c, plateau=0.0, slope=0.0):
    arr = np.empty((1, 1), dtype=object)
    arr[0, 0] = make_banded_ramp(c, plateau, slope)
    return GnnParams((arr,))


# --- formulas -------------------------------------------------------------


def test_plug_in_example():
    v = theorem1_value(1, 1, 1, 1, 1, 2, 0.1, 100, 1 / math.sqrt(3))
    # exact value (2 + 20 pi) / (10 sqrt 3); the quoted 3.744 is a rounding
    assert math.isclose(v, (2 + 20 * math.pi) / (10 * math.sqrt(3)), rel_tol=1e-14)
    assert abs(v - 3.744) < 1e-3
    assert math.isclose(v, bound_t1(1, 1, 1, 1, 1, 2, 0.1, 100, 1 / math.sqrt(3)), rel_tol=1e-12)


def test_formulas_match_independent_calculator():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        L, F = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        A1, A2, A3 = rng.uniform(0, 10, size=3)
        n_c = int(rng.integers(0, 6))
        delta = rng.uniform(1e-3, 1)
        n1, n2 = rng.integers(1, 5000, size=2)
        norm = rng.uniform(0, 3)
        a = theorem1_value(L, F, A1, A2, A3, n_c, delta, n1, norm)
        assert math.isclose(a, bound_t1(L, F, A1, A2, A3, n_c, delta, n1, norm), rel_tol=1e-12)
        b = theorem2_value(L, F, A1, A2, A3, n_c, delta, n1, n2, norm)
        assert math.isclose(b, bound_t2(L, F, A1, A2, A3, n_c, delta, n1, n2, norm),
                            rel_tol=1e-12)


def test_theorem4_value_terms():
    full = theorem4_value(4.0, 0.5, 1.0, 2, 0.25, 64, 0.5)
    step = theorem4_value(4.0, 0.5, 1.0, 2, 0.25, 64, 0.5, step_input=True)
    assert math.isclose(full - step, 2 / math.sqrt(3) / 8, rel_tol=1e-12)
    assert math.isclose(step, 2 * (0.5 + math.pi * 8) / 8 * 0.5, rel_tol=1e-12)


def test_bound_strictly_decreasing_in_n():
    sizes = [2 ** k for k in range(2, 13)]
    v = [theorem1_value(2, 3, 1.0, 0.7, 1.0, 2, 0.1, n, 0.5) for n in sizes]
    assert all(a > b for a, b in zip(v, v[1:]))
    w = [theorem2_value(2, 3, 1.0, 0.7, 1.0, 2, 0.1, n, 4096, 0.5) for n in sizes[:-1]]
    assert all(a > b for a, b in zip(w, w[1:]))


# --- pipeline -------------------------------------------------------------


def test_zero_filters_give_zero_error(specs):
    H = ramp_net(0.2)
    r = theorem1_bound(H, product_graphon(), linear_signal(), 64, W_spec=specs["product"])
    assert r.empirical_error == 0 and r.satisfied and r.bound_value > 0


@pytest.mark.parametrize("n", [64, 256, 1024])
def test_product_kernel_theorem1_satisfied(n, specs):
    H = random_banded_params(np.random.default_rng(1), 2, 3, 0.2)
    r = theorem1_bound(H, product_graphon(), linear_signal(), n, W_spec=specs["product"])
    assert r.satisfied
    assert r.constants["c"] == 0.2 and r.constants["A1"] == 1.0


def test_soundness_randomized(specs):
    rng = np.random.default_rng(2024)
    signals = ["linear", "sine", "tent"]
    count = 0
    for case in range(120):
        family = ("product", "gaussian", "min")[case % 3]
        W = graphon_family(family)
        X = signal_family(signals[case % len(signals)])
        L, F = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        H = random_banded_params(rng, L, F, float(rng.uniform(0.02, 0.4)))
        n = int(rng.choice([8, 32, 100, 256]))
        cache = _SizeCache(H, W, X)
        kind = case % 4
        if kind == 3:
            r = theorem2_bound(H, W, X, n, 2 * n, W_spec=specs[family], cache=cache)
        elif kind == 2:
            r = theorem4_bound(H.layers[0][0, 0], W, X, n, step_input=bool(case % 8 == 2),
                               W_spec=specs[family])
        else:
            r = theorem1_bound(H, W, X, n, W_spec=specs[family], cache=cache)
        assert r.satisfied, (case, family, n, r.empirical_error, r.bound_value)
        count += 1
    assert count >= 100


def test_triangle_consistency(specs):
    W, X = graphon_family("gaussian"), linear_signal()
    H = random_banded_params(np.random.default_rng(3), 2, 2, 0.05)
    cache = _SizeCache(H, W, X)
    for n1, n2 in [(16, 64), (64, 256), (100, 400)]:
        t2 = theorem2_bound(H, W, X, n1, n2, W_spec=specs["gaussian"], cache=cache)
        a = theorem1_bound(H, W, X, n1, W_spec=specs["gaussian"], cache=cache)
        b = theorem1_bound(H, W, X, n2, W_spec=specs["gaussian"], cache=cache)
        assert t2.empirical_error <= a.empirical_error + b.empirical_error + 1e-9
        assert t2.satisfied


def test_theorem2_band_constants_combine(specs):
    W, X = graphon_family("gaussian"), linear_signal()
    H = random_banded_params(np.random.default_rng(4), 1, 1, 0.02)
    r = theorem2_bound(H, W, X, 8, 64, W_spec=specs["gaussian"])
    r1 = theorem1_bound(H, W, X, 8, W_spec=specs["gaussian"])
    r2 = theorem1_bound(H, W, X, 64, W_spec=specs["gaussian"])
    assert r.constants["n_c"] == max(r1.constants["n_c"], r2.constants["n_c"])
    assert r.constants["delta_c"] == min(r1.constants["delta_c"], r2.constants["delta_c"])


def test_sizes_must_differ(specs):
    H = random_banded_params(np.random.default_rng(5), 1, 1, 0.1)
    with pytest.raises(ValueError, match="sizes must differ"):
        theorem2_bound(H, product_graphon(), linear_signal(), 32, 32, W_spec=specs["product"])


def test_sbm_refused():
    H = random_banded_params(np.random.default_rng(5), 1, 1, 0.1)
    with pytest.raises(AssumptionError, match="not Lipschitz"):
        theorem1_bound(H, sbm_graphon(), linear_signal(), 32)


def test_empty_band_drops_eigengap_term(specs):
    H = random_banded_params(np.random.default_rng(6), 2, 2, 1.0)
    r = theorem1_bound(H, product_graphon(), linear_signal(), 64, W_spec=specs["product"])
    assert r.constants["n_c"] == 0 and r.constants["delta_c"] == math.inf
    assert any("empty band" in note for note in r.notes)
    assert math.isclose(r.bound_value, 1 / math.sqrt(3) / 8, rel_tol=1e-12)
    assert r.satisfied


def test_constant_sweep_skips_fit():
    H = random_banded_params(np.random.default_rng(7), 2, 2, 0.1)
    s = transfer_sweep(H, constant_graphon(0.5), signal_family("constant"), [8, 16, 32], 64)
    assert s.fit is None and any("vanish" in note for note in s.notes)
    assert all(r.empirical_error <= 1e-9 for r in s.reports)


def test_sweep_bounds_decrease_and_csv(tmp_path, specs):
    H = random_banded_params(np.random.default_rng(0), 2, 3, 0.1)
    s = transfer_sweep(H, product_graphon(), linear_signal(), [32, 64, 128], 512,
                       W_spec=specs["product"])
    assert [r.sizes for r in s.reports] == [(32, 512), (64, 512), (128, 512)]
    b = [r.bound_value for r in s.reports]
    assert b[0] > b[1] > b[2]
    assert all(r.satisfied for r in s.reports)
    write_bounds_csv(tmp_path / "b.csv", s.reports)
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == ",".join(BOUNDS_COLUMNS) and len(lines) == 4


def test_rank_one_convolution_against_closed_form(specs):
    f = make_banded_ramp(0.1, 0.0, 1.0)
    n = 50
    r = theorem4_bound(f, product_graphon(), linear_signal(), n, W_spec=specs["product"])
    # T_H X = f(1/3) v; the graph side is f(lam_n) x with lam_n = sum_i (i/n)^2 / n
    lam_n = np.sum((np.arange(n) / n) ** 2) / n
    u = (np.arange(2 ** 20) + 0.5) / 2 ** 20
    diff = f(1 / 3) * u - f(lam_n) * np.floor(u * n) / n
    assert math.isclose(r.empirical_error, math.sqrt(np.mean(diff ** 2)), rel_tol=1e-6)
    assert r.satisfied


def test_theorem4_zero_filter(specs):
    r = theorem4_bound(make_banded_ramp(0.3, 0.0, 0.0), product_graphon(), linear_signal(), 16,
                       W_spec=specs["product"])
    assert r.empirical_error == 0


def test_theorem4_needs_band():
    from graphon_nn.filters import polynomial_filter

    with pytest.raises(ValueError):
        theorem4_bound(polynomial_filter([0.0, 0.5]), product_graphon(), linear_signal(), 16)


# --- rates ----------------------------------------------------------------


def test_fit_rate_exact_power_law():
    n = np.array([10, 20, 40, 80])
    fit = fit_rate(n, 3.0 * n ** -0.5)
    assert math.isclose(fit.slope, -0.5, rel_tol=1e-12) and math.isclose(fit.r2, 1.0)
    with pytest.raises(ValueError):
        fit_rate([10, 5], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_rate([10, 20], [1.0, 0.0])


def test_boundary_mismatch_rate():
    # a steep but Lipschitz community boundary off the sampling grid gives the n^-1/2 rate
    from graphon_nn.graphon import ramp_sbm_graphon

    W = ramp_sbm_graphon(boundary=0.5 + 1e-4, width=1e-5)
    H = random_banded_params(np.random.default_rng(0), 2, 3, 0.1)
    cache = _SizeCache(H, W, linear_signal())
    spec = decompose_graphon(W)
    sizes = [64, 128, 256, 512]
    errs = [theorem2_bound(H, W, linear_signal(), n, 2 * n, W_spec=spec, cache=cache)
            .empirical_error for n in sizes]
    slope = fit_rate(sizes, errs).slope
    assert -0.8 <= slope <= -0.3


@pytest.mark.xfail(strict=True, reason="smooth kernels converge at O(1/n), faster than the "
                                       "guaranteed n^-1/2; the slope leaves [-0.8, -0.3]")
def test_smooth_family_t1_rate_band(specs):
    H = random_banded_params(np.random.default_rng(0), 2, 3, 0.1)
    W, X = graphon_family("gaussian"), linear_signal()
    cache = _SizeCache(H, W, X)
    sizes = [64, 128, 256, 512, 1024, 2048]
    errs = [theorem1_bound(H, W, X, n, W_spec=specs["gaussian"], cache=cache).empirical_error
            for n in sizes]
    assert -0.8 <= fit_rate(sizes, errs).slope <= -0.3


@pytest.mark.xfail(strict=True, reason="same O(1/n) behaviour for the transfer sweep")
def test_smooth_family_sweep_rate_band(specs):
    H = random_banded_params(np.random.default_rng(0), 2, 3, 0.1)
    s = transfer_sweep(H, product_graphon(), linear_signal(), [50, 100, 200, 400, 800], 1600,
                       W_spec=specs["product"])
    assert -0.75 <= s.fit.slope <= -0.35
