import logging
from datetime import datetime
from typing import List, Optional, Tuple

import numpy as np

from app.daily.schemas import FitConfig, WeeklyProfileModel
from app.daily.services import eval_weekly_series
from app.pulse.schemas import PULSE_SIGMA_MAX, PULSE_SIGMA_MIN, EventPulse
from app.pulse.services import DEFAULT_WINDOW_HOURS, fit_pulse_samples, pulse_on_axis, pulse_values
from app.regression.schemas import AttendanceRegression, SigmaPrior
from app.regression.services import estimate_initial_pulse
from app.timeseries.schemas import EventCalendar, EventInfo, HourlyTrafficSeries
from app.utils.exceptions import ArgumentError, OrderingError
from .schemas import Forecast, ForecastMode, ForecastRequest, SingleStepState

logger = logging.getLogger(__name__)

CANDIDATE_SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))

# a refit may not peak above this multiple of the larger of the initial peak and the observed residuals
REFIT_PEAK_LIMIT = 1.5


def place_pulse(
    event: EventInfo,
    origin: datetime,
    regression: AttendanceRegression,
    prior: SigmaPrior,
    kickoff_offset: float = -1.0,
) -> EventPulse:
    """Initial pulse of `event` with its centre moved onto the hour axis anchored at `origin`."""
    return pulse_on_axis(estimate_initial_pulse(event, regression, prior, kickoff_offset), event, origin)


def _pulse_at(pulse: EventPulse, hour: float) -> float:
    return float(pulse_values(pulse, np.array([hour]))[0])


def multistep_forecast(
    model: WeeklyProfileModel,
    request: ForecastRequest,
    regression: Optional[AttendanceRegression],
    prior: Optional[SigmaPrior],
    kickoff_offset: float = -1.0,
    window: float = DEFAULT_WINDOW_HOURS,
) -> Forecast:
    if request.mode != ForecastMode.MULTI_STEP:
        raise ArgumentError(f"multi-step prediction got a {request.mode.value} request")

    daily = eval_weekly_series(model, request.start, request.horizon)
    hours = daily.hours()
    pulse = np.zeros(len(daily))

    if request.events.events and (regression is None or prior is None):
        logger.warning(f"multistep_events_ignored events={len(request.events)} reason=no_regression")
    else:
        for event in request.events.events:
            placed = place_pulse(event, daily.origin, regression, prior, kickoff_offset)
            mask = np.abs(hours - placed.center) <= window
            pulse[mask] += pulse_values(placed, hours[mask])

    return Forecast(
        predicted=HourlyTrafficSeries.from_array(daily.start, daily.array + pulse),
        daily=daily,
        pulse=HourlyTrafficSeries.from_array(daily.start, pulse),
    )


def predict_multistep(
    model: WeeklyProfileModel,
    request: ForecastRequest,
    regression: Optional[AttendanceRegression],
    prior: Optional[SigmaPrior],
    kickoff_offset: float = -1.0,
    window: float = DEFAULT_WINDOW_HOURS,
) -> HourlyTrafficSeries:
    """
    Forecast `request.horizon` hours from advance information only.

    Each hour is the weekly profile plus the initial pulse of every event
    whose centre lies within `window` hours.
    """
    return multistep_forecast(model, request, regression, prior, kickoff_offset, window).predicted


def candidate_pulses(pulse: EventPulse, count: int = 5, spread: float = 0.25) -> Tuple[EventPulse, ...]:
    """The pulse itself followed by up to four (+-spread) perturbations of amplitude and width."""
    if count < 1:
        raise ArgumentError(f"candidate count must be positive (got {count})")
    candidates: List[EventPulse] = [pulse]
    for amp_sign, sigma_sign in CANDIDATE_SIGNS[: count - 1]:
        sigma = pulse.sigma * (1.0 + sigma_sign * spread)
        candidates.append(
            EventPulse(
                amplitude=max(0.0, pulse.amplitude * (1.0 + amp_sign * spread)),
                center=pulse.center,
                sigma=min(max(sigma, PULSE_SIGMA_MIN), PULSE_SIGMA_MAX),
            )
        )
    return tuple(candidates)


def initial_state(pulse: EventPulse, count: int = 5, spread: float = 0.25) -> SingleStepState:
    return SingleStepState(current_pulse=pulse, initial_candidates=candidate_pulses(pulse, count, spread))


def predict_singlestep_advance(
    state: SingleStepState,
    observed_total: Optional[float],
    daily_value: Optional[float],
    next_hour: float,
    daily_next: float,
    config: FitConfig,
    observed_hour: Optional[float] = None,
    window: float = DEFAULT_WINDOW_HOURS,
    onset_sigmas: Optional[float] = 1.5,
    min_refit_samples: int = 3,
) -> Tuple[SingleStepState, float]:
    """
    Take in the latest observation and predict the next hour.

    The residual `observed_total - daily_value` (at `observed_hour`, default
    `next_hour - 1`) joins the history when it falls inside the pulse window.
    Once the history holds `min_refit_samples` residuals and has reached
    `centre - onset_sigmas * sigma` (no onset gate when `onset_sigmas` is None),
    amplitude and width are refitted from every initial candidate and the
    smallest in-sample sse is kept; until then the initial pulse predicts.
    A refit peaking above `REFIT_PEAK_LIMIT` times the larger of the initial
    peak and the observed residuals is dropped and the current pulse stays.
    The centre never moves.

    **Returns**
    - the updated state and `daily_next + pulse(next_hour)` (pulse only inside the window)

    **Errors**
    - OrderingError: an observation or `next_hour` does not move forward in time
    """
    center = state.initial_pulse.center
    residuals = list(state.observed_residuals)
    appended = False

    if observed_total is not None:
        if daily_value is None:
            raise ArgumentError("an observation needs the daily value of its hour")
        hour = next_hour - 1.0 if observed_hour is None else observed_hour
        if state.last_hour is not None and hour <= state.last_hour:
            raise OrderingError(f"observation at hour {hour} does not follow hour {state.last_hour}")
        if abs(hour - center) <= window:
            residuals.append((float(hour), float(observed_total - daily_value)))
            appended = True

    if residuals and next_hour <= residuals[-1][0]:
        raise OrderingError(f"next hour {next_hour} does not follow observed hour {residuals[-1][0]}")

    pulse, best_sse = state.current_pulse, state.best_sse
    ready = len(residuals) >= min_refit_samples
    if onset_sigmas is not None:
        ready = ready and residuals[-1][0] >= center - onset_sigmas * state.initial_pulse.sigma

    if appended and ready:
        hours = np.array([h for h, _ in residuals])
        values = np.array([v for _, v in residuals])
        fits = [fit_pulse_samples(hours, values, center, candidate, config) for candidate in state.initial_candidates]
        best = min(fits, key=lambda fit: fit.sse)
        limit = REFIT_PEAK_LIMIT * max(state.initial_pulse.peak, float(values.max()))
        if best.pulse.peak > limit:
            logger.debug(
                f"single_step_refit_rejected hour={residuals[-1][0]} peak={best.pulse.peak} limit={limit}"
            )
        else:
            pulse, best_sse = best.pulse, best.sse
            logger.debug(
                f"single_step_refit hour={residuals[-1][0]} amplitude={pulse.amplitude} "
                f"sigma={pulse.sigma} sse={best_sse}"
            )
    elif not ready:
        pulse, best_sse = state.initial_pulse, None

    prediction = daily_next
    if abs(next_hour - center) <= window:
        prediction += _pulse_at(pulse, next_hour)

    new_state = SingleStepState(
        observed_residuals=tuple(residuals),
        current_pulse=pulse,
        initial_candidates=state.initial_candidates,
        best_sse=best_sse,
    )
    return new_state, prediction


def rolling_single_step(
    model: WeeklyProfileModel,
    observed: HourlyTrafficSeries,
    calendar: EventCalendar,
    regression: Optional[AttendanceRegression],
    prior: Optional[SigmaPrior],
    config: FitConfig,
    kickoff_offset: float = -1.0,
    window: float = DEFAULT_WINDOW_HOURS,
    candidate_count: int = 5,
    candidate_spread: float = 0.25,
    onset_sigmas: Optional[float] = 1.5,
    min_refit_samples: int = 3,
) -> Forecast:
    """
    Rolling-origin pass over `observed`: hour `i` is predicted from
    observations up to hour `i - 1`. Outside every event window the
    prediction is the weekly profile alone.
    """
    daily = eval_weekly_series(model, observed.start, len(observed))
    hours = daily.hours()
    d = daily.array
    y = observed.array
    pulse = np.zeros(len(observed))

    if calendar.events and (regression is None or prior is None):
        logger.warning(f"single_step_events_ignored events={len(calendar)} reason=no_regression")
        events = ()
    else:
        events = calendar.events

    for event in events:
        placed = place_pulse(event, daily.origin, regression, prior, kickoff_offset)
        state = initial_state(placed, candidate_count, candidate_spread)
        for i in np.flatnonzero(np.abs(hours - placed.center) <= window):
            if i > 0:
                observation = dict(observed_total=y[i - 1], daily_value=d[i - 1], observed_hour=hours[i - 1])
            else:
                observation = dict(observed_total=None, daily_value=None, observed_hour=None)
            state, _ = predict_singlestep_advance(
                state,
                next_hour=hours[i],
                daily_next=d[i],
                config=config,
                window=window,
                onset_sigmas=onset_sigmas,
                min_refit_samples=min_refit_samples,
                **observation,
            )
            pulse[i] += _pulse_at(state.current_pulse, hours[i])
        logger.info(
            f"single_step_event_done commencement={event.commencement.isoformat()} "
            f"amplitude={state.current_pulse.amplitude} sigma={state.current_pulse.sigma}"
        )

    return Forecast(
        predicted=HourlyTrafficSeries.from_array(observed.start, d + pulse),
        daily=daily,
        pulse=HourlyTrafficSeries.from_array(observed.start, pulse),
        observed=observed,
    )
