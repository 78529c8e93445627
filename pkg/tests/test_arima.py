import numpy as np
import pytest

from chaincast.arima import (
    ArimaSpec,
    FitConfig,
    ar_from_pacf,
    fit,
    forecast,
    one_step_history,
    rolling_one_step,
    select_order,
)
from chaincast.errors import FitError
from chaincast.series import Series
from chaincast.synthetic import simulate_arima, simulate_arma


def test_spec_validation():
    with pytest.raises(ValueError):
        ArimaSpec(-1, 0, 0)
    with pytest.raises(ValueError):
        ArimaSpec(0, 3, 0)
    with pytest.raises(ValueError):
        ArimaSpec(3, 1, 3)
    assert ArimaSpec(2, 1, 1).n_params() == 4


def test_ar_from_pacf_stays_stationary():
    rng = np.random.default_rng(0)
    for _ in range(200):
        pac = rng.uniform(-0.999, 0.999, rng.integers(1, 6))
        phi = ar_from_pacf(pac)
        roots = np.roots(np.concatenate([-phi[::-1], [1.0]]))
        assert np.all(np.abs(roots) > 1.0)


def test_fit_drift_only_closed_form():
    levels = Series(np.array([10.0, 12.5, 14.0, 17.5, 18.0] * 4))
    fitted = fit(levels, ArimaSpec(0, 1, 0))
    w = np.diff(levels.values)
    assert fitted.mu == w.mean()
    np.testing.assert_array_equal(fitted.residuals, w - w.mean())
    assert fitted.n_effective == w.size
    assert fitted.sigma2 == pytest.approx(np.mean((w - w.mean()) ** 2))
    assert fitted.css == pytest.approx(np.sum((w - w.mean()) ** 2))


def test_information_criteria_formulas():
    levels = Series(simulate_arma([0.5], [], 1.0, 300, seed=1))
    fitted = fit(levels, ArimaSpec(1, 0, 0))
    k = fitted.spec.n_params()
    n = fitted.n_effective
    assert fitted.aic == pytest.approx(n * np.log(fitted.sigma2) + 2 * k)
    assert fitted.sic == pytest.approx(n * np.log(fitted.sigma2) + k * np.log(n))
    assert fitted.sic > fitted.aic  # ln(297) > 2


def test_fit_recovers_ar1():
    s = Series(simulate_arma([0.6], [], 0.0, 2000, seed=3))
    fitted = fit(s, ArimaSpec(1, 0, 0))
    assert fitted.phi[0] == pytest.approx(0.6, abs=0.05)
    assert fitted.sigma2 == pytest.approx(1.0, abs=0.1)


def test_fit_recovers_ma1():
    s = Series(simulate_arma([], [0.5], 0.0, 2000, seed=4))
    fitted = fit(s, ArimaSpec(0, 0, 1))
    assert fitted.theta[0] == pytest.approx(0.5, abs=0.07)


def test_fit_mean_is_recursion_constant():
    # for an AR model the constant is mean * (1 - sum(phi)), not the mean
    s = Series(simulate_arma([0.5], [], 5.0, 3000, seed=5))
    fitted = fit(s, ArimaSpec(1, 0, 0))
    implied_mean = fitted.mu / (1.0 - fitted.phi.sum())
    assert implied_mean == pytest.approx(s.values.mean(), rel=0.05)


def test_fit_polynomial_roots_outside_unit_circle():
    s = Series(simulate_arma([0.5, 0.3], [0.4], 0.0, 1500, seed=6))
    fitted = fit(s, ArimaSpec(2, 0, 1))
    ar_roots = np.roots(np.concatenate([-fitted.phi[::-1], [1.0]]))
    ma_roots = np.roots(np.concatenate([fitted.theta[::-1], [1.0]]))
    assert np.all(np.abs(ar_roots) > 1.0)
    assert np.all(np.abs(ma_roots) > 1.0)


def test_fit_is_deterministic():
    s = Series(simulate_arma([0.4], [0.3], 0.0, 600, seed=7))
    a = fit(s, ArimaSpec(1, 0, 1))
    b = fit(s, ArimaSpec(1, 0, 1))
    np.testing.assert_array_equal(a.phi, b.phi)
    np.testing.assert_array_equal(a.theta, b.theta)
    assert a.mu == b.mu and a.css == b.css


def test_fit_constant_difference_unidentifiable():
    ramp = Series(np.arange(100.0))
    with pytest.raises(FitError):
        fit(ramp, ArimaSpec(1, 1, 0))


def test_fit_constant_difference_drift_only_is_fine():
    ramp = Series(np.arange(30.0))
    fitted = fit(ramp, ArimaSpec(0, 1, 0))
    assert fitted.mu == 1.0
    assert fitted.sigma2 == 0.0
    assert fitted.aic == -np.inf


def test_fit_short_series_rejected():
    with pytest.raises(ValueError, match="too short"):
        fit(Series(np.arange(25.0)), ArimaSpec(1, 0, 1))


def test_select_order_white_noise_prefers_empty_model():
    s = Series(np.random.default_rng(8).normal(0.0, 1.0, 400))
    best = select_order(s, d=0, max_p=2, max_q=2)
    assert (best.spec.p, best.spec.q) == (0, 0)


def test_select_order_recovers_ar1():
    s = Series(simulate_arma([0.7], [], 0.0, 1200, seed=9))
    best = select_order(s, d=0, max_p=2, max_q=1)
    assert (best.spec.p, best.spec.d, best.spec.q) == (1, 0, 0)


def test_select_order_criterion_validation():
    s = Series(np.random.default_rng(10).normal(0.0, 1.0, 200))
    with pytest.raises(ValueError):
        select_order(s, d=0, criterion="bic")


def test_forecast_drift_walk_closed_form():
    levels = Series(100.0 + 0.5 * np.arange(40.0)
                    + np.random.default_rng(11).normal(0, 0.1, 40))
    fitted = fit(levels, ArimaSpec(0, 1, 0))
    fc = forecast(fitted, levels.values[-1:], horizon=5)
    expected = levels.values[-1] + fitted.mu * np.arange(1, 6)
    np.testing.assert_allclose(fc.values, expected, atol=1e-12)
    assert fc.horizon == 5


def test_forecast_ar1_matches_hand_recursion():
    s = Series(simulate_arma([0.6], [], 2.0, 1000, seed=12))
    fitted = fit(s, ArimaSpec(1, 0, 0))
    fc = forecast(fitted, s.values[-1:], horizon=4)
    prev = s.values[-1]
    expected = []
    for _ in range(4):
        prev = fitted.mu + fitted.phi[0] * prev
        expected.append(prev)
    np.testing.assert_allclose(fc.values, expected, atol=1e-12)


def test_forecast_ma_flattens_to_constant_after_q_steps():
    s = Series(simulate_arma([], [0.5], 3.0, 1000, seed=13))
    fitted = fit(s, ArimaSpec(0, 0, 1))
    fc = forecast(fitted, s.values[-1:], horizon=5)
    np.testing.assert_array_equal(fc.values[1:], np.full(4, fitted.mu))


def test_forecast_validation():
    s = Series(simulate_arma([0.5], [], 0.0, 500, seed=14))
    fitted = fit(s, ArimaSpec(1, 0, 0))
    with pytest.raises(ValueError):
        forecast(fitted, s.values[-1:], horizon=0)
    fitted2 = fit(Series(simulate_arima([0.5], [], 0.0, 1, 500, seed=14)),
                  ArimaSpec(2, 1, 0))
    with pytest.raises(ValueError, match="anchor"):
        forecast(fitted2, np.ones(2), horizon=3)


def test_rolling_one_step_random_walk_is_previous_plus_drift():
    rng = np.random.default_rng(15)
    levels = 50.0 + np.cumsum(rng.normal(0.3, 1.0, 120))
    train, test = Series(levels[:100]), Series(levels[100:])
    fitted = fit(train, ArimaSpec(0, 1, 0))
    preds = rolling_one_step(fitted, test, anchors=levels[:100])
    prev = np.concatenate([[levels[99]], test.values[:-1]])
    np.testing.assert_allclose(preds.values, prev + fitted.mu, atol=1e-12)


def test_rolling_one_step_ar1_conditions_on_actuals():
    s = simulate_arma([0.7], [], 1.0, 600, seed=16)
    train, test = Series(s[:500]), Series(s[500:])
    fitted = fit(train, ArimaSpec(1, 0, 0))
    preds = rolling_one_step(fitted, test, anchors=s[:500])
    prev = np.concatenate([[s[499]], test.values[:-1]])
    np.testing.assert_allclose(preds.values, fitted.mu + fitted.phi[0] * prev,
                               atol=1e-12)


def test_one_step_history_nan_prefix_then_agrees_with_rolling():
    levels = simulate_arima([0.5], [], 0.2, 1, 400, seed=17, start_level=80.0)
    train, test = Series(levels[:340]), Series(levels[340:])
    fitted = fit(train, ArimaSpec(1, 1, 0))
    hist = one_step_history(fitted, Series(levels))
    assert np.all(np.isnan(hist[:2]))  # p + d = 2
    assert np.all(np.isfinite(hist[2:]))
    rolled = rolling_one_step(fitted, test, anchors=levels[:340])
    np.testing.assert_array_equal(hist[340:], rolled.values)


def test_one_step_history_with_ma_matches_rolling_closely():
    levels = simulate_arima([0.4], [0.3], 0.0, 1, 400, seed=18, start_level=200.0)
    train, test = Series(levels[:340]), Series(levels[340:])
    fitted = fit(train, ArimaSpec(1, 1, 1))
    hist = one_step_history(fitted, Series(levels))
    rolled = rolling_one_step(fitted, test, anchors=levels[:340])
    np.testing.assert_allclose(hist[340:], rolled.values, atol=1e-9)
