import math
from datetime import datetime

import numpy as np
import pytest

from app.daily.schemas import ComponentLabel, DayClass, FitConfig, WeeklyProfileModel
from app.daily.services import eval_component, eval_day, eval_week, eval_weekly_series, fit_weekly, weekly_hours_from
from app.metrics.services import r2, rmse
from app.timeseries.schemas import EventCalendar, HourlyTrafficSeries
from app.timeseries.services import calendar_index, split_by_events
from app.utils.exceptions import ArgumentError, InsufficientDataError
from tests.helpers import CET, flat_weekly, random_weekly

MONDAY = datetime(2013, 12, 2, tzinfo=CET)

SUNDAY_TRIPLE = {
    ComponentLabel.MSU: (100.0, 9.0, 2.0),
    ComponentLabel.ASU: (80.0, 15.0, 2.0),
    ComponentLabel.ESU: (60.0, 21.0, 2.0),
}


def model_with(components) -> WeeklyProfileModel:
    """Zero-amplitude profile with the given (R, t, sigma) per label."""
    base = flat_weekly(peak=0.0)
    vector = base.to_vector()
    for i, label in enumerate(ComponentLabel):
        if label in components:
            vector[3 * i : 3 * i + 3] = components[label]
    return WeeklyProfileModel.from_vector(vector)


def non_event_days(series: HourlyTrafficSeries):
    return split_by_events(series, EventCalendar()).non_event_days


def synthesize(model: WeeklyProfileModel, weeks: int, noise: float = 0.0, seed: int = 0) -> HourlyTrafficSeries:
    clean = eval_weekly_series(model, MONDAY, 168 * weeks)
    rng = np.random.default_rng(seed)
    return HourlyTrafficSeries.from_array(MONDAY, clean.array + rng.normal(0.0, noise * model.max_peak, len(clean)))


@pytest.mark.parametrize(
    "t,expected",
    [(9.0, 100.0), (11.0, 60.65306597126334), (7.0, 100.0 * math.exp(-0.5))],
)
def test_eval_component(t, expected):
    component = model_with({ComponentLabel.MW: (100.0, 9.0, 2.0)}).component(ComponentLabel.MW)
    assert eval_component(component, t) == pytest.approx(expected, rel=1e-12)
    assert 0.0 <= eval_component(component, t) <= component.peak


def test_eval_component_zero_amplitude():
    component = flat_weekly(peak=0.0).component(ComponentLabel.AW)
    assert eval_component(component, 15.0) == 0.0


def test_eval_day_sunday_triple():
    model = model_with(SUNDAY_TRIPLE)
    expected = 100 * math.exp(-9 / 8) + 80 * math.exp(-9 / 8) + 60 * math.exp(-81 / 8)
    assert eval_day(model, DayClass.SUNDAY.labels, 12.0) == pytest.approx(expected, rel=1e-12)


def test_eval_day_reduces_to_single_component():
    model = model_with({ComponentLabel.MSU: (100.0, 9.0, 2.0)})
    assert eval_day(model, {"msu", "asu", "esu"}, 9.0) == pytest.approx(100.0)
    assert eval_day(flat_weekly(), DayClass.WEEKDAY.labels, 9.0) == 0.0


def test_eval_day_rejects_mixed_triple():
    with pytest.raises(ArgumentError):
        eval_day(flat_weekly(), (ComponentLabel.MW, ComponentLabel.ASA, ComponentLabel.ESU), 9.0)


def test_eval_week_sunday_matches_eval_day():
    model = model_with(SUNDAY_TRIPLE)
    for t in np.linspace(0.0, 23.5, 48):
        assert eval_week(model, 7, t) == pytest.approx(eval_day(model, DayClass.SUNDAY.labels, t), rel=1e-12, abs=1e-12)


def test_eval_week_weekday_component_on_wednesday():
    model = model_with({ComponentLabel.MW: (100.0, 9.0, 1.0)})
    assert eval_week(model, 3, 9.0) == pytest.approx(100.0, rel=1e-12)


def test_eval_week_zero_profile():
    zero = flat_weekly()
    assert all(eval_week(zero, k, t) == 0.0 for k in range(1, 8) for t in (0.0, 9.5, 23.0))


@pytest.mark.parametrize("k", [0, 8, -1])
def test_eval_week_rejects_day_index(k):
    with pytest.raises(ArgumentError):
        eval_week(flat_weekly(), k, 9.0)


def test_eval_week_depends_on_weekly_hour_only():
    model = random_weekly(seed=4)
    assert eval_week(model, 2, 5.0) == eval_week(model, 1, 29.0)
    assert eval_week(model, 1, 2.0) == pytest.approx(eval_week(model, 7, 26.0), rel=1e-12)


def test_eval_week_is_linear_in_amplitudes_and_non_negative():
    model = random_weekly(seed=11)
    vector = np.asarray(model.to_vector())
    scaled_vector = vector.copy()
    scaled_vector[0::3] *= 2.5
    scaled = WeeklyProfileModel.from_vector(scaled_vector)
    for k in range(1, 8):
        for t in (0.0, 6.25, 9.0, 14.5, 21.0, 23.75):
            value = eval_week(model, k, t)
            assert value >= 0.0
            assert eval_week(scaled, k, t) == pytest.approx(2.5 * value, rel=1e-12)


def test_weekly_series_follows_eval_week():
    model = random_weekly(seed=2)
    series = eval_weekly_series(model, MONDAY, 48)
    assert series.values[9] == pytest.approx(eval_week(model, 1, 9.0), rel=1e-12)
    assert series.values[24 + 15] == pytest.approx(eval_week(model, 2, 15.0), rel=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fit_weekly_recovers_noiseless_profile(seed):
    truth = random_weekly(seed)
    series = synthesize(truth, weeks=2)
    result = fit_weekly(non_event_days(series), FitConfig())

    for fitted, expected in zip(result.model.components, truth.components):
        assert fitted.peak == pytest.approx(expected.peak, rel=0.01)
        assert fitted.center == pytest.approx(expected.center, abs=0.1)
        assert fitted.sigma == pytest.approx(expected.sigma, rel=0.02)

    assert result.objective <= 1e-6 * result.n_samples * truth.max_peak**2
    reconstruction = eval_weekly_series(result.model, MONDAY, len(series))
    assert rmse(series.array, reconstruction.array) <= 1e-3 * truth.max_peak


def test_fit_weekly_objective_history_is_monotone():
    result = fit_weekly(non_event_days(synthesize(random_weekly(5), weeks=2, noise=0.05)), FitConfig())
    history = result.history
    assert len(history) > 1
    assert all(later <= earlier for earlier, later in zip(history, history[1:]))
    assert history[-1] == result.objective


def test_fit_weekly_with_noise_explains_training_days():
    truth = random_weekly(seed=7)
    series = synthesize(truth, weeks=2, noise=0.05, seed=7)
    result = fit_weekly(non_event_days(series), FitConfig())
    reconstruction = eval_weekly_series(result.model, MONDAY, len(series))
    assert r2(series.array, reconstruction.array) >= 0.97


def test_fit_weekly_gradient_descent_lowers_objective():
    series = synthesize(random_weekly(3), weeks=1)
    days = non_event_days(series)
    config = FitConfig(method="gradient_descent", max_iterations=500, restarts=1)
    result = fit_weekly(days, config)
    assert result.history[-1] < result.history[0]
    assert all(later <= earlier for earlier, later in zip(result.history, result.history[1:]))


def test_fit_weekly_on_zero_traffic():
    zero = HourlyTrafficSeries.from_array(MONDAY, np.zeros(168))
    result = fit_weekly(non_event_days(zero), FitConfig(restarts=1))
    assert result.objective == 0.0
    assert all(c.peak == 0.0 for c in result.model.components)


def test_fit_weekly_requires_every_day_class():
    weekdays_only = non_event_days(synthesize(random_weekly(0), weeks=1))[:5]
    with pytest.raises(InsufficientDataError):
        fit_weekly(weekdays_only, FitConfig())
    with pytest.raises(InsufficientDataError):
        fit_weekly((), FitConfig())


def test_fit_weekly_is_reproducible_for_a_seed():
    days = non_event_days(synthesize(random_weekly(8), weeks=1, noise=0.05))
    first = fit_weekly(days, FitConfig(seed=3))
    second = fit_weekly(days, FitConfig(seed=3))
    assert first.model == second.model


def test_weekly_axis_starts_at_the_calendar_index():
    saturday = datetime(2013, 12, 7, 20, tzinfo=CET)
    hours = weekly_hours_from(saturday, 30)
    assert hours[0] == calendar_index(saturday).weekly_hour == 140.0
    assert hours[28] == 0.0
