from datetime import datetime

import numpy as np
import pytest
from scipy.signal import lfilter

from app.baselines.schemas import ArmaModel, ArmaOrder
from app.baselines.services import (
    fit_arma,
    forecast,
    one_step_predictions,
    rolling_one_step,
    rolling_seasonal_naive,
    seasonal_naive,
    select_order_bic,
)
from app.timeseries.schemas import HourlyTrafficSeries
from app.utils.exceptions import ArgumentError, DegeneracyError, InsufficientDataError, SelectionError
from tests.helpers import CET

START = datetime(2013, 12, 2, tzinfo=CET)


def series(values) -> HourlyTrafficSeries:
    return HourlyTrafficSeries.from_array(START, values)


def simulate_ar(phi, n: int, seed: int, burn: int = 200) -> HourlyTrafficSeries:
    rng = np.random.default_rng(seed)
    shocks = rng.normal(size=n + burn)
    return series(lfilter([1.0], [1.0] + [-v for v in phi], shocks)[burn:])


@pytest.mark.parametrize("seed", range(20))
def test_ar1_coefficient_is_recovered(seed):
    model = fit_arma(simulate_ar([0.8], 2000, seed), ArmaOrder(p=1, d=0, q=0))
    assert model.ar_coeffs[0] == pytest.approx(0.8, abs=0.1)
    assert model.stationary and not model.explosive


def test_white_noise_has_no_autoregression():
    noise = series(np.random.default_rng(5).normal(size=2000))
    model = fit_arma(noise, ArmaOrder(p=1, d=0, q=0))
    assert abs(model.ar_coeffs[0]) < 0.1
    assert model.noise_variance == pytest.approx(1.0, rel=0.1)


def test_arma_with_moving_average_part():
    rng = np.random.default_rng(9)
    shocks = rng.normal(size=3000)
    y = lfilter([1.0, 0.4], [1.0, -0.5], shocks)[200:]
    model = fit_arma(series(y), ArmaOrder(p=1, d=0, q=1))
    assert model.ar_coeffs[0] == pytest.approx(0.5, abs=0.1)
    assert model.ma_coeffs[0] == pytest.approx(0.4, abs=0.1)
    assert model.invertible


def test_constant_series_is_degenerate():
    with pytest.raises(DegeneracyError):
        fit_arma(series(np.full(200, 42.0)), ArmaOrder(p=1, d=0, q=0))


def test_short_series_is_rejected():
    with pytest.raises(InsufficientDataError):
        fit_arma(series(np.arange(25, dtype=float)), ArmaOrder(p=1, d=0, q=2))


def test_order_needs_a_term_without_differencing():
    with pytest.raises(ValueError):
        ArmaOrder(p=0, d=0, q=0)
    assert ArmaOrder(p=0, d=1, q=0).label == "ARIMA(0,1,0)"


def test_bic_picks_ar2_in_most_runs():
    hits = 0
    for seed in range(20):
        chosen = select_order_bic(simulate_ar([0.6, -0.3], 1000, seed), 3, 3, 0)
        hits += (chosen.p, chosen.q) == (2, 0)
    assert hits >= 16


def test_bic_choice_ignores_scale():
    data = simulate_ar([0.6, -0.3], 800, 42)
    scaled = series(1000.0 * data.array)
    assert select_order_bic(data, 2, 2, 0) == select_order_bic(scaled, 2, 2, 0)


def test_bic_grid_limits_and_failures():
    with pytest.raises(ArgumentError):
        select_order_bic(simulate_ar([0.5], 300, 0), 6, 1, 0)
    with pytest.raises(SelectionError):
        select_order_bic(series(np.arange(15, dtype=float) % 4), 1, 1, 0)


def test_ar1_forecast_halves_each_step():
    model = ArmaModel(order=ArmaOrder(p=1, d=0, q=0), ar_coeffs=(0.5,), intercept=0.0)
    result = forecast(model, series([3.0, 5.0, 8.0]), 3)
    assert result.values == (4.0, 2.0, 1.0)
    assert result.start == START.replace(hour=3)


def test_zero_coefficients_forecast_the_intercept():
    model = ArmaModel(order=ArmaOrder(p=1, d=0, q=0), ar_coeffs=(0.0,), intercept=7.5)
    assert forecast(model, series([1.0, 2.0]), 4).values == (7.5,) * 4


def test_random_walk_forecast_is_flat():
    model = ArmaModel(order=ArmaOrder(p=0, d=1, q=0))
    assert forecast(model, series([3.0, 9.0, 4.0]), 5).values == (4.0,) * 5


def test_arima_forecast_equals_integrated_arma_forecast():
    levels = np.cumsum(simulate_ar([0.5], 1500, 3).array) + 100.0
    arima = fit_arma(series(levels), ArmaOrder(p=2, d=1, q=1))
    arma = ArmaModel(
        order=ArmaOrder(p=2, d=0, q=1),
        ar_coeffs=arima.ar_coeffs,
        ma_coeffs=arima.ma_coeffs,
        intercept=arima.intercept,
        noise_variance=arima.noise_variance,
    )
    direct = forecast(arima, series(levels), 48).array
    composed = levels[-1] + np.cumsum(forecast(arma, series(np.diff(levels)), 48).array)
    np.testing.assert_allclose(direct, composed, rtol=0, atol=1e-9)


def test_forecast_reaches_process_mean():
    model = ArmaModel(order=ArmaOrder(p=1, d=0, q=0), ar_coeffs=(0.5,), intercept=10.0)
    assert model.process_mean == 20.0
    result = forecast(model, series([100.0]), 200)
    assert result.values[-1] == pytest.approx(20.0, rel=0.01)


def test_forecast_argument_checks():
    model = ArmaModel(order=ArmaOrder(p=2, d=0, q=0), ar_coeffs=(0.5, 0.1), intercept=0.0)
    with pytest.raises(ArgumentError):
        forecast(model, series([1.0, 2.0]), 0)
    with pytest.raises(InsufficientDataError):
        forecast(model, series([1.0]), 3)


def test_rolling_one_step_uses_every_previous_observation():
    model = ArmaModel(order=ArmaOrder(p=1, d=0, q=0), ar_coeffs=(0.5,), intercept=1.0)
    history = series([2.0, 4.0])
    test = HourlyTrafficSeries.from_array(history.end, [6.0, 10.0, 0.0])
    result = rolling_one_step(model, history, test)
    assert result.values == (3.0, 4.0, 6.0)
    assert result.start == test.start
    with pytest.raises(ArgumentError):
        rolling_one_step(model, history, series([1.0]))


def test_seasonal_naive_repeats_last_period():
    pattern = np.arange(168, dtype=float)
    history = series(np.tile(pattern, 2))
    np.testing.assert_array_equal(seasonal_naive(history, 336).array, np.tile(pattern, 2))
    assert seasonal_naive(history, 1).values == (0.0,)


def test_seasonal_naive_index_arithmetic():
    history = series(np.arange(169, dtype=float))
    assert seasonal_naive(history, 2).values == (1.0, 2.0)
    with pytest.raises(InsufficientDataError):
        seasonal_naive(series(np.arange(100, dtype=float)), 2)


def test_rolling_seasonal_naive_looks_one_period_back():
    history = series(np.arange(168, dtype=float))
    test = HourlyTrafficSeries.from_array(history.end, np.full(200, -1.0))
    result = rolling_seasonal_naive(history, test)
    assert result.values[:168] == tuple(float(v) for v in range(168))
    assert result.values[168:] == (-1.0,) * 32


def test_in_sample_predictions_follow_the_recursion():
    model = ArmaModel(order=ArmaOrder(p=1, d=0, q=0), ar_coeffs=(0.5,), intercept=1.0)
    result = one_step_predictions(model, series([2.0, 4.0, 6.0]))
    assert result.values == (2.0, 3.0)
    assert result.start == START.replace(hour=1)
    with pytest.raises(InsufficientDataError):
        one_step_predictions(model, series([2.0]))


def test_in_sample_predictions_match_rolling_on_the_test_window():
    levels = np.cumsum(simulate_ar([0.5], 400, 8).array)
    model = ArmaModel(order=ArmaOrder(p=1, d=1, q=1), ar_coeffs=(0.4,), ma_coeffs=(0.3,), intercept=0.1)
    history = series(levels[:300])
    test = HourlyTrafficSeries.from_array(history.end, levels[300:])
    in_sample = one_step_predictions(model, series(levels))
    np.testing.assert_allclose(in_sample.array[-100:], rolling_one_step(model, history, test).array, rtol=0, atol=1e-9)
