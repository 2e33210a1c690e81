import math

import numpy as np
import pytest

from thermosd import dynamics as dy
from thermosd import physics as ph


def test_pole_at_default_clock():
    d = dy.discretize(dy.FirstOrderLag(1e4, 3.3e-3), 131e3)
    assert d.pole == pytest.approx(math.exp(-1 / (131e3 * 3.3e-3)), rel=1e-15)
    assert d.pole == pytest.approx(0.99769, abs=1e-5)


def test_dc_gain_exact():
    d = dy.discretize(dy.FirstOrderLag(1e4, 3.3e-3), 131e3)
    assert d.dc_gain == pytest.approx(1e4, rel=1e-12)
    assert abs(d.response(0.0)) == pytest.approx(1e4, rel=1e-12)


def test_long_tau_is_accumulator():
    d = dy.discretize(dy.FirstOrderLag(1.0, 1e9), 1e3)
    assert d.pole == pytest.approx(1.0, abs=1e-11)


def test_step_response_one_tau():
    lag = dy.FirstOrderLag(2.0, 3.3e-3)
    f_ck = 131e3
    y = [dy.step_lag(lag, 1.0, 1 / f_ck) for _ in range(2000)]
    n_tau = lag.tau * f_ck  # samples in one tau
    target = 2.0 * (1 - math.exp(-1))
    k = next(i for i, v in enumerate(y) if v >= target) + 1
    assert abs(k - n_tau) <= 1


def test_zoh_matches_continuous_step_at_samples():
    lag = dy.FirstOrderLag(1.0, 1e-3)
    t_e = 1e-4
    y = [dy.step_lag(lag, 1.0, t_e) for _ in range(50)]
    exact = 1 - np.exp(-np.arange(1, 51) * t_e / lag.tau)
    np.testing.assert_allclose(y, exact, rtol=1e-12)


def test_zero_and_constant_input():
    lag = dy.FirstOrderLag(3.0, 1e-3)
    assert all(dy.step_lag(lag, 0.0, 1e-4) == 0.0 for _ in range(100))
    for _ in range(5000):
        y = dy.step_lag(lag, 0.7, 1e-4)
    assert y == pytest.approx(2.1, rel=1e-12)


def test_impulse_sum():
    lag = dy.FirstOrderLag(5.0, 2e-3)
    t_e = 1e-4
    total = dy.step_lag(lag, 1.0, t_e)
    for _ in range(20000):
        total += dy.step_lag(lag, 0.0, t_e)
    assert total == pytest.approx(5.0, rel=1e-9)


def test_cutoff():
    assert dy.cutoff_frequency(dy.FirstOrderLag(1, 3.3e-3)) == pytest.approx(48.2, abs=0.05)
    assert dy.cutoff_frequency(dy.FirstOrderLag(1, 1.0)) == pytest.approx(0.159, abs=1e-3)
    assert dy.cutoff_frequency(dy.FirstOrderLag(1, 0.5)) == pytest.approx(2 * dy.cutoff_frequency(dy.FirstOrderLag(1, 1.0)))


def test_frequency_response_matches_continuous():
    lag = dy.FirstOrderLag(1e4, 3.3e-3)
    f_ck = 131e3
    d = dy.discretize(lag, f_ck)
    f = np.linspace(0, f_ck / 20, 500)
    np.testing.assert_allclose(np.abs(d.response(f)), np.abs(lag.response(f)), rtol=0.01)


def test_block_filter_matches_step_recursion():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(3000)
    lag = dy.FirstOrderLag(1.0, 3e-3)
    d = dy.discretize(lag, 50e3)
    # recursion y[n] = p y[n-1] + g x[n-1]
    ref, y = [], 0.0
    prev = 0.0
    for v in x:
        y = d.pole * y + d.gain * prev
        ref.append(y)
        prev = v
    y1, s, xp = d.filter(x[:1234])
    y2, _, _ = d.filter(x[1234:], s, xp)
    np.testing.assert_allclose(np.concatenate([y1, y2]), ref, rtol=1e-12, atol=1e-15)


def test_cascade_commutes():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(5000)
    a = dy.discretize(dy.FirstOrderLag(1.0, 3e-3), 131e3)
    b = dy.discretize(dy.FirstOrderLag(1e4, 3.3e-3), 131e3)
    ab = b.filter(a.filter(x)[0])[0]
    ba = a.filter(b.filter(x)[0])[0]
    np.testing.assert_allclose(ab, ba, rtol=1e-12, atol=1e-12 * np.abs(ab).max())


def test_acceleration_to_power():
    op = ph.operating_point()
    b = ph.BridgeParameters()
    assert dy.acceleration_to_power(1.0, op, b) == pytest.approx(153e-6)
    assert dy.acceleration_to_power(0.0, op, b) == 0.0
    assert dy.acceleration_to_power(2.0, op, b) == pytest.approx(306e-6)


def test_invalid():
    with pytest.raises(ValueError):
        dy.FirstOrderLag(1.0, 0.0)
    with pytest.raises(ValueError):
        dy.discretize(dy.FirstOrderLag(1.0, 1.0), 0.0)
