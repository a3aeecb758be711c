import math
from datetime import datetime

import numpy as np
import pytest

from app.daily.schemas import FitConfig
from app.daily.services import eval_weekly_series
from app.data.services import default_synthetic_spec
from app.metrics.services import time_run
from app.pulse.schemas import EventPulse
from app.pulse.services import (
    compose_total,
    eval_pulse,
    fit_pulse,
    pulse_on_axis,
    pulse_on_event_day,
    pulse_values,
    pulse_volume,
)
from app.timeseries.schemas import HourlyTrafficSeries
from app.timeseries.services import extract_residual
from app.utils.exceptions import ArgumentError, InsufficientDataError
from tests.helpers import CET, event

SUNDAY = datetime(2013, 12, 1, tzinfo=CET)

# volume, centre, width of four December games
GAMES = [
    (829.8, 15.0, 1.263),
    (349.8, 21.0, 1.176),
    (769.7, 20.75, 1.011),
    (2059.8, 20.75, 1.155),
]


def zero_day(start: datetime = SUNDAY, hours: int = 24) -> HourlyTrafficSeries:
    return HourlyTrafficSeries.from_array(start, np.zeros(hours))


def test_peak_of_first_game():
    pulse = EventPulse(amplitude=829.8, center=15.0, sigma=1.263)
    assert eval_pulse(pulse, 15.0) == pytest.approx(262.1, abs=0.05)
    assert eval_pulse(pulse, 15.0) == pulse.peak


def test_unit_normalised_pulse():
    pulse = EventPulse(amplitude=math.sqrt(2 * math.pi), center=0.0, sigma=1.0)
    assert eval_pulse(pulse, 0.0) == pytest.approx(1.0, rel=1e-15)


def test_zero_volume_is_zero_everywhere():
    pulse = EventPulse(amplitude=0.0, center=12.0, sigma=2.0)
    assert not np.any(pulse_values(pulse, np.linspace(0, 24, 97)))


def test_pulse_is_symmetric_and_linear_in_volume():
    pulse = EventPulse(amplitude=500.0, center=20.75, sigma=1.1)
    doubled = pulse.model_copy(update={"amplitude": 1000.0})
    for delta in (0.1, 0.5, 1.7, 4.0):
        assert eval_pulse(pulse, 20.75 + delta) == pytest.approx(eval_pulse(pulse, 20.75 - delta), rel=1e-14)
        assert eval_pulse(pulse, 20.75 + delta) < pulse.peak
        assert eval_pulse(doubled, 20.75 + delta) == pytest.approx(2 * eval_pulse(pulse, 20.75 + delta), rel=1e-14)


@pytest.mark.parametrize("volume,center,sigma", GAMES)
def test_volume_identity_for_recorded_games(volume, center, sigma):
    pulse = EventPulse(amplitude=volume, center=center, sigma=sigma)
    assert pulse_volume(pulse, grid_step=0.01) == pytest.approx(volume, rel=1e-3)


def test_volume_of_reference_pulses():
    assert pulse_volume(EventPulse(amplitude=1000.0, center=0.0, sigma=1.0)) == pytest.approx(1000.0, abs=1.0)
    assert pulse_volume(EventPulse(amplitude=0.0, center=0.0, sigma=1.0)) == 0.0


def test_volume_error_shrinks_with_grid_step():
    pulse = EventPulse(amplitude=1000.0, center=3.0, sigma=1.0)
    coarse = abs(pulse_volume(pulse, grid_step=0.25) - 1000.0)
    fine = abs(pulse_volume(pulse, grid_step=0.125) - 1000.0)
    assert fine <= coarse + 1e-9
    assert fine < 1e-3


def test_volume_rejects_coarse_grid_and_short_span():
    pulse = EventPulse(amplitude=100.0, center=0.0, sigma=1.0)
    with pytest.raises(ArgumentError):
        pulse_volume(pulse, grid_step=0.5)
    with pytest.raises(ArgumentError):
        pulse_volume(pulse, span=3.0)


def test_compose_on_zero_daily():
    pulse = EventPulse(amplitude=769.7, center=20.75, sigma=1.011)
    total = compose_total(zero_day(), pulse)
    assert pulse.peak == pytest.approx(303.7, abs=0.1)
    assert total.values[20] == pytest.approx(eval_pulse(pulse, 20.0), rel=1e-14)
    assert total.values[21] == pytest.approx(eval_pulse(pulse, 21.0), rel=1e-14)
    assert total.values[21] > total.values[20]


def test_compose_with_zero_pulse_keeps_daily():
    daily = eval_weekly_series(default_synthetic_spec().weekly, SUNDAY, 24)
    total = compose_total(daily, EventPulse(amplitude=0.0, center=15.0, sigma=1.0))
    assert total == daily


def test_residual_of_composition_is_the_pulse():
    daily = eval_weekly_series(default_synthetic_spec().weekly, SUNDAY, 24)
    pulse = EventPulse(amplitude=829.8, center=15.0, sigma=1.263)
    residual = extract_residual(compose_total(daily, pulse), daily)
    np.testing.assert_allclose(residual.array, pulse_values(pulse, daily.hours()), rtol=1e-12, atol=1e-10)


def test_fit_recovers_noiseless_pulse():
    truth = EventPulse(amplitude=800.0, center=15.0, sigma=1.25)
    residual = compose_total(zero_day(), truth)
    result = fit_pulse(residual, 15.0, EventPulse(amplitude=500.0, center=15.0, sigma=2.0), FitConfig())

    assert result.pulse.amplitude == pytest.approx(800.0, rel=0.005)
    assert result.pulse.sigma == pytest.approx(1.25, rel=0.01)
    assert result.pulse.center == 15.0
    assert result.sse <= 1e-8 * float(residual.array @ residual.array)
    assert result.converged
    assert result.r2 == pytest.approx(1.0, abs=1e-6)


def test_fit_with_free_center_finds_offset_peak():
    truth = EventPulse(amplitude=600.0, center=19.4, sigma=1.0)
    residual = compose_total(zero_day(), truth)
    init = EventPulse(amplitude=400.0, center=19.0, sigma=1.5)
    result = fit_pulse(residual, 19.0, init, FitConfig(), free_center=True)
    assert result.pulse.center == pytest.approx(19.4, abs=0.01)
    assert result.pulse.amplitude == pytest.approx(600.0, rel=0.005)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fit_recovers_game_over_noisy_sunday(seed):
    spec = default_synthetic_spec()
    daily = eval_weekly_series(spec.weekly, SUNDAY, 24)
    truth = EventPulse(amplitude=829.8, center=15.0, sigma=1.263)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, 0.05 * spec.weekly.max_peak, 24)
    observed = HourlyTrafficSeries.from_array(SUNDAY, compose_total(daily, truth).array + noise)

    residual = extract_residual(observed, daily)
    init = EventPulse(amplitude=600.0, center=15.0, sigma=1.5)
    timed = time_run(lambda: fit_pulse(residual, 15.0, init, FitConfig()))
    fitted = timed.value.pulse

    assert fitted.amplitude == pytest.approx(829.8, rel=0.05)
    assert fitted.sigma == pytest.approx(1.263, rel=0.10)
    assert fitted.center == 15.0
    assert timed.elapsed_ms < 1000.0


def test_fit_on_zero_residual_keeps_initial_width():
    result = fit_pulse(zero_day(), 15.0, EventPulse(amplitude=300.0, center=15.0, sigma=1.7), FitConfig())
    assert result.pulse.amplitude == 0.0
    assert result.pulse.sigma == 1.7
    assert result.sse == 0.0


def test_fit_needs_three_samples_in_window():
    with pytest.raises(InsufficientDataError):
        fit_pulse(zero_day(), 15.0, EventPulse(amplitude=1.0, center=15.0, sigma=1.0), FitConfig(), window=0.5)


def test_negative_residuals_stay_in_the_objective():
    truth = EventPulse(amplitude=400.0, center=12.0, sigma=1.0)
    values = compose_total(zero_day(), truth).array
    values[[6, 7, 17, 18]] = -20.0
    residual = HourlyTrafficSeries.from_array(SUNDAY, values)
    result = fit_pulse(residual, 12.0, EventPulse(amplitude=300.0, center=12.0, sigma=1.5), FitConfig())
    assert result.sse >= 4 * 20.0**2 * 0.9


def test_pulse_moves_between_event_day_and_series_axis():
    game = event(datetime(2013, 12, 4, 22, 0, tzinfo=CET))
    origin = datetime(2013, 12, 2, tzinfo=CET)
    stored = EventPulse(amplitude=349.8, center=21.0, sigma=1.176)

    placed = pulse_on_axis(stored, game, origin)
    assert placed.center == pytest.approx(69.0)
    assert pulse_on_event_day(placed, game, origin) == stored
