import math

import numpy as np
import pytest
from scipy import special
from traitlets import TraitError

from decodetools import latency_model
from decodetools.latency_model import LatencyConfig

POLY = latency_model.RatePolynomial(0.0008198, 107.803)
COLLAPSE_POLY = latency_model.RatePolynomial(0.000260, 143.084)


def test_first_buffer():
    cfg = LatencyConfig()
    assert latency_model.buffer_time_recursive(cfg, 1) == pytest.approx(53e-6)


def test_linear_regime_stays_bounded():
    cfg = LatencyConfig()
    series = latency_model.buffer_time_series(cfg, 30)
    assert all(seconds is not None for _, seconds in series)
    # a < 1: the continuous solution approaches T_l / (1 - a)
    limit = cfg.t_l / (1 - cfg.c / cfg.t_s)
    assert latency_model.buffer_time_recursive(cfg, 200, exact=False) == \
        pytest.approx(limit, rel=1e-6)


@pytest.mark.parametrize('c', [0.5e-6, 1e-6, 2e-6, 2.8e-6])
@pytest.mark.parametrize('j', [1, 2, 5, 12])
def test_closed_form_matches_continuous_recursion(c, j):
    cfg = LatencyConfig(c=c)
    assert latency_model.buffer_time_closed_form(cfg, j) == pytest.approx(
        latency_model.buffer_time_recursive(cfg, j, exact=False), rel=1e-9)


def test_unit_ratio_limit():
    cfg = LatencyConfig(c=1.4e-6)
    for j in (1, 4, 9):
        expected = cfg.c * cfg.rounds + j * cfg.t_l
        assert latency_model.buffer_time_closed_form(cfg, j) == \
            pytest.approx(expected)
    near = LatencyConfig(c=1.4e-6 * (1 + 1e-11))
    assert latency_model.buffer_time_closed_form(near, 9) == \
        pytest.approx(cfg.c * cfg.rounds + 9 * cfg.t_l)


def test_exact_rounds_are_ceilinged():
    cfg = LatencyConfig()
    first = latency_model.buffer_time_recursive(cfg, 1)
    second = latency_model.buffer_time_recursive(cfg, 2)
    assert second == pytest.approx(math.ceil(first / cfg.t_s) * cfg.c + cfg.t_l)
    assert second >= latency_model.buffer_time_recursive(cfg, 2, exact=False)


def test_geometric_growth():
    cfg = LatencyConfig(c=2.8e-6, max_buffer=1e6)
    t20 = latency_model.buffer_time_recursive(cfg, 20, exact=False)
    t21 = latency_model.buffer_time_recursive(cfg, 21, exact=False)
    assert t21 / t20 == pytest.approx(2.0, rel=1e-3)


def test_divergence():
    cfg = LatencyConfig(c=2.8e-6, max_buffer=1e-3)
    with pytest.raises(latency_model.BufferDivergenceError):
        latency_model.buffer_time_recursive(cfg, 40)
    series = latency_model.buffer_time_series(cfg, 40)
    assert series[0][1] is not None and series[-1][1] is None


def test_polynomial_decode_time():
    cfg = LatencyConfig(decode_poly=[0.01e-6, 0.5e-6, 0.0])
    assert latency_model.decode_time(cfg, 10) == pytest.approx(6e-6)
    with pytest.raises(ValueError):
        latency_model.buffer_time_closed_form(cfg, 3)
    assert latency_model.buffer_time_recursive(cfg, 3) > 0


def test_superlinear_blow_up():
    cfg = LatencyConfig(c=2e-6, t_l=20e-6)
    for exact in (True, False):
        times = [t for _, t in latency_model.buffer_time_series(cfg, 6, exact)]
        steps = np.diff(times)
        assert all(later > earlier for earlier, later in zip(steps, steps[1:]))
        assert times[5] > 6 * times[0]
    assert latency_model.buffer_time_recursive(cfg, 6) == pytest.approx(752e-6)


def test_config_validation():
    with pytest.raises(TraitError):
        LatencyConfig(t_s=0)
    with pytest.raises(TraitError):
        LatencyConfig(r1=0)
    with pytest.raises(ValueError):
        latency_model.buffer_time_recursive(LatencyConfig(), 0)


def test_windows():
    cfg = LatencyConfig()
    assert latency_model.sliding_window_buffer(cfg, [33]) == pytest.approx(53e-6)
    plan = latency_model.WindowPlan((17, 16))
    assert plan.regimes(cfg) == ['slow', 'fast']
    # the second window arrives after its predecessor is decoded: 20 + 22.4
    assert latency_model.sliding_window_buffer(cfg, plan) == \
        pytest.approx(42.4e-6)


def test_all_fast_windows_telescope():
    cfg = LatencyConfig(r1=12, r2=21)
    sizes = (3, 5, 7, 8, 10)
    plan = latency_model.WindowPlan(sizes)
    assert plan.regimes(cfg)[1:] == ['fast'] * 4
    expected = cfg.t_l + sum(sizes[1:]) * cfg.t_s
    assert latency_model.sliding_window_buffer(cfg, plan) == \
        pytest.approx(expected, rel=1e-12)


def test_mixed_windows_add_gaps_after_slow_windows():
    cfg = LatencyConfig()
    plan = latency_model.WindowPlan((10, 12, 5, 6))
    assert plan.regimes(cfg) == ['slow', 'fast', 'slow', 'fast']
    # T_l + T_DEC(10), gap 16.8 - 10, T_DEC(5), gap 8.4 - 5
    assert latency_model.sliding_window_buffer(cfg, plan) == \
        pytest.approx(45.2e-6)


def test_slow_windows_add_decode_times():
    cfg = LatencyConfig(c=3e-6)
    sizes = (11, 11, 11)
    assert latency_model.WindowPlan(sizes).regimes(cfg) == ['slow'] * 3
    assert latency_model.sliding_window_buffer(cfg, sizes) == \
        pytest.approx(cfg.t_l + 33 * cfg.c)


@pytest.mark.parametrize('sizes', [(10, 10), (33, 0), ()])
def test_bad_window_plans(sizes):
    with pytest.raises(latency_model.WindowPlanError):
        latency_model.sliding_window_buffer(LatencyConfig(), sizes)


@pytest.mark.parametrize('x', [-0.3678, -0.3, -0.1, -1e-3, -1e-8])
def test_lambert_w_lower_branch(x):
    expected = special.lambertw(x, -1).real
    assert latency_model.lambert_w(x, -1) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize('x', [-0.3678, -0.2, 0.0, 0.5, 2.0, 10.0, 1e4])
def test_lambert_w_principal_branch(x):
    expected = special.lambertw(x, 0).real
    assert latency_model.lambert_w(x, 0) == pytest.approx(expected, abs=1e-9)


def test_lambert_w_domain():
    assert latency_model.lambert_w(-1 / math.e, -1) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        latency_model.lambert_w(-0.5)
    with pytest.raises(ValueError):
        latency_model.lambert_w(0.1, -1)
    with pytest.raises(ValueError):
        latency_model.lambert_w(0.1, 1)


@pytest.mark.parametrize('dm', [1, 10, 100, 1000, 10**5])
@pytest.mark.parametrize('p,delta', [(1e-3, 1e-12), (3e-3, 1e-9), (5e-4, 1e-15)])
def test_distance_matches_bisection(dm, p, delta):
    closed = latency_model.distance_for_dm(dm, p, delta, POLY)
    bisected = latency_model.distance_by_bisection(dm, p, delta, POLY)
    assert closed % 2 == 1
    assert abs(closed - bisected) <= 2
    assert latency_model.logical_rate_polynomial(closed, dm, p, POLY) < delta


def test_distance_grows_with_depth():
    curve = latency_model.distance_curve([10, 100, 10**3, 10**4, 10**6],
                                         1e-3, 1e-12, POLY)
    assert curve == sorted(curve)
    assert curve[-1] > curve[0]


@pytest.mark.parametrize('poly', [POLY, COLLAPSE_POLY])
@pytest.mark.parametrize('delta', [1e-9, 1e-12, 1e-15])
def test_distance_grows_slowly_with_depth(poly, delta):
    dms = [10**k for k in range(1, 7)]
    curve = latency_model.distance_curve(dms, 1e-3, delta, poly)
    steps = np.diff(curve)
    # one odd step per decade, occasionally two where rounding falls badly
    assert set(steps.tolist()) <= {2, 4}
    assert curve[-1] - curve[0] <= 12


def test_distance_steps_by_two_per_decade():
    dms = [10, 100, 10**3, 10**4]
    curve = latency_model.distance_curve(dms, 1e-3, 1e-9, POLY)
    assert curve == [19, 21, 23, 25]
    for dm, d in zip(dms, curve):
        assert latency_model.distance_for_dm(10 * dm, 1e-3, 1e-9, POLY) - d <= 2


def test_superthreshold():
    with pytest.raises(latency_model.SuperthresholdError):
        latency_model.distance_for_dm(10, 0.01, 1e-9, POLY)
    with pytest.raises(ValueError):
        latency_model.distance_for_dm(10, 1e-3, 2.0, POLY)


def test_generous_target():
    assert latency_model.distance_for_dm(1, 1e-3, 0.5, (1e-6, 107.803)) == 1


def test_closed_form_over_random_configs():
    rng = np.random.default_rng(17)
    for _ in range(100):
        cfg = LatencyConfig(
            t_s=rng.uniform(0.5e-6, 2e-6), t_l=rng.uniform(1e-6, 50e-6),
            c=rng.uniform(0.2e-6, 3e-6), r1=int(rng.integers(1, 40)),
            r2=int(rng.integers(1, 40)), max_buffer=1e6)
        for j in range(1, 11):
            assert latency_model.buffer_time_closed_form(cfg, j) == \
                pytest.approx(latency_model.buffer_time_recursive(
                    cfg, j, exact=False), rel=1e-9)
