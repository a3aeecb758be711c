from datetime import datetime

import pytest

from app.regression.schemas import AttendanceRegression, SigmaPrior
from app.regression.services import estimate_initial_pulse, fit_attendance_regression, fit_sigma_prior, pearson
from app.utils.exceptions import ArgumentError, DegenerateVarianceError, InsufficientDataError
from tests.helpers import CET, event

SLOPE = 0.03323
INTERCEPT = -258.85
ATTENDANCES = (18316, 30952, 69776, 32761)
GAME_SIGMAS = (1.263, 1.176, 1.011, 1.155)

TREND = AttendanceRegression(slope=SLOPE, intercept=INTERCEPT, pearson_r=0.99, n_samples=4)


def test_pearson_of_perfect_lines():
    x = [1.0, 2.0, 3.0, 7.0]
    assert pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1.0, abs=1e-12)
    assert pearson(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_rejects_bad_input():
    with pytest.raises(DegenerateVarianceError):
        pearson([1.0, 2.0, 3.0], [4.0, 4.0, 4.0])
    with pytest.raises(ArgumentError):
        pearson([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ArgumentError):
        pearson([1.0], [2.0])


def test_regression_recovers_exact_line():
    pairs = [(a, SLOPE * a + INTERCEPT) for a in ATTENDANCES]
    regression = fit_attendance_regression(pairs)
    assert regression.slope == pytest.approx(SLOPE, rel=1e-6)
    assert regression.intercept == pytest.approx(INTERCEPT, rel=1e-6)
    assert regression.pearson_r == pytest.approx(1.0, abs=1e-12)
    assert regression.n_samples == 4


def test_regression_on_three_points():
    regression = fit_attendance_regression([(10, 5.0), (20, 9.0), (30, 13.0)])
    assert regression.slope == pytest.approx(0.4)
    assert regression.intercept == pytest.approx(1.0)


def test_regression_with_constant_volume_has_no_correlation():
    regression = fit_attendance_regression([(10, 7.0), (20, 7.0), (40, 7.0)])
    assert regression.slope == pytest.approx(0.0, abs=1e-12)
    assert regression.intercept == pytest.approx(7.0)
    assert regression.pearson_r == 0.0


@pytest.mark.parametrize(
    "pairs",
    [[], [(30000, 800.0)], [(30000, 800.0), (30000, 900.0)]],
)
def test_regression_needs_two_distinct_attendances(pairs):
    with pytest.raises(InsufficientDataError):
        fit_attendance_regression(pairs)


def test_sigma_prior_is_the_mean_width():
    prior = fit_sigma_prior(GAME_SIGMAS)
    assert prior.mean_sigma == pytest.approx(1.15125, rel=1e-12)
    assert prior.n_samples == 4
    with pytest.raises(InsufficientDataError):
        fit_sigma_prior([])


def test_initial_pulse_from_advance_information():
    game = event(datetime(2013, 12, 1, 16, 0, tzinfo=CET), attendance=32761)
    pulse = estimate_initial_pulse(game, TREND, SigmaPrior(mean_sigma=1.15125, n_samples=4))
    assert pulse.amplitude == pytest.approx(829.8, abs=0.01)
    assert pulse.center == 15.0
    assert pulse.sigma == 1.15125


def test_initial_pulse_honours_kickoff_offset():
    game = event(datetime(2013, 12, 8, 21, 45, tzinfo=CET))
    pulse = estimate_initial_pulse(game, TREND, SigmaPrior(mean_sigma=1.2, n_samples=1), kickoff_offset=-0.5)
    assert pulse.center == 21.25


def test_small_crowd_clamps_volume_at_zero():
    game = event(datetime(2013, 12, 8, 15, 0, tzinfo=CET), attendance=5000)
    assert TREND.predict(5000) < 0
    pulse = estimate_initial_pulse(game, TREND, SigmaPrior(mean_sigma=1.2, n_samples=1))
    assert pulse.amplitude == 0.0
