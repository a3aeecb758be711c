import logging
import math
from datetime import datetime
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from app.daily.schemas import FitConfig
from app.metrics.services import r2
from app.timeseries.schemas import EventInfo, HourlyTrafficSeries
from app.timeseries.services import hours_between
from app.utils.exceptions import ArgumentError, DegenerateVarianceError, InsufficientDataError
from app.utils.least_squares import minimize_squares
from .schemas import PULSE_SIGMA_MAX, PULSE_SIGMA_MIN, EventPulse, PulseFitResult

logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2.0 * math.pi)
DEFAULT_WINDOW_HOURS = 6.0
MIN_FIT_SAMPLES = 3


def pulse_values(pulse: EventPulse, hours: np.ndarray) -> np.ndarray:
    u = np.asarray(hours, dtype=float) - pulse.center
    return pulse.peak * np.exp(-(u * u) / (2.0 * pulse.sigma**2))


def eval_pulse(pulse: EventPulse, t: float) -> float:
    return pulse.peak * math.exp(-((t - pulse.center) ** 2) / (2.0 * pulse.sigma**2))


def pulse_volume(pulse: EventPulse, grid_step: float = 0.01, span: float = 6.0) -> float:
    """Trapezoid integral of the pulse over `center +- span * sigma`; recovers `amplitude`."""
    if grid_step <= 0 or grid_step > pulse.sigma / 4.0:
        raise ArgumentError(f"grid_step must be in (0, sigma/4] = (0, {pulse.sigma / 4.0}] (got {grid_step})")
    if span < 6.0:
        raise ArgumentError(f"span must be at least 6 sigma (got {span})")

    half_width = span * pulse.sigma
    steps = int(math.ceil(2.0 * half_width / grid_step))
    grid = np.linspace(pulse.center - half_width, pulse.center + half_width, steps + 1)
    return float(trapezoid(pulse_values(pulse, grid), grid))


def compose_total(daily: HourlyTrafficSeries, pulse: EventPulse) -> HourlyTrafficSeries:
    """Daily traffic plus the pulse sampled at each hour of the series' axis."""
    return HourlyTrafficSeries.from_array(daily.start, daily.array + pulse_values(pulse, daily.hours()))


def _pulse_residual(hours: np.ndarray, y: np.ndarray, fixed_center: Optional[float]):
    def residual(x: np.ndarray):
        amplitude, sigma = x[0], x[1]
        center = fixed_center if fixed_center is not None else x[2]
        u = hours - center
        phi = np.exp(-(u * u) / (2.0 * sigma * sigma)) / (sigma * SQRT_2PI)
        values = amplitude * phi
        columns = [phi, values * (u * u / sigma**3 - 1.0 / sigma)]
        if fixed_center is None:
            columns.append(values * u / sigma**2)
        return values - y, np.column_stack(columns)

    return residual


def fit_pulse_samples(
    hours,
    values,
    center: float,
    init: EventPulse,
    config: FitConfig,
    free_center: bool = False,
    window: float = DEFAULT_WINDOW_HOURS,
) -> PulseFitResult:
    """
    Least-squares fit of `(amplitude, sigma)` to residual samples with the
    centre held at `center` (or free within `center +- window`).

    **Errors**
    - InsufficientDataError: fewer than three samples
    """
    t = np.asarray(hours, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size < MIN_FIT_SAMPLES:
        raise InsufficientDataError(f"pulse fit needs at least {MIN_FIT_SAMPLES} samples (got {t.size})")

    sigma0 = min(max(init.sigma, PULSE_SIGMA_MIN), PULSE_SIGMA_MAX)

    if not np.any(y):
        return PulseFitResult(
            pulse=EventPulse(amplitude=0.0, center=center, sigma=sigma0),
            sse=0.0,
            converged=True,
            n_samples=int(t.size),
        )

    fixed = None if free_center else center
    x0 = [init.amplitude, sigma0]
    lower = [0.0, PULSE_SIGMA_MIN]
    upper = [np.inf, PULSE_SIGMA_MAX]
    if free_center:
        x0.append(center)
        lower.append(center - window)
        upper.append(center + window)

    result = minimize_squares(_pulse_residual(t, y, fixed), np.asarray(x0), np.asarray(lower), np.asarray(upper), config)

    pulse = EventPulse(
        amplitude=float(result.x[0]),
        sigma=float(result.x[1]),
        center=float(result.x[2]) if free_center else center,
    )
    try:
        fit_r2 = r2(y, pulse_values(pulse, t))
    except DegenerateVarianceError:
        fit_r2 = None

    return PulseFitResult(
        pulse=pulse,
        sse=result.objective,
        converged=result.converged,
        n_samples=int(t.size),
        iterations=result.iterations,
        r2=fit_r2,
    )


def fit_pulse(
    residual: HourlyTrafficSeries,
    t_sg_fixed: float,
    init: EventPulse,
    config: FitConfig,
    window: float = DEFAULT_WINDOW_HOURS,
    free_center: bool = False,
) -> PulseFitResult:
    """
    Fit one event pulse to the nonroutine residual.

    Only samples within `t_sg_fixed +- window` hours (on the residual's axis)
    enter the objective; negative residuals are kept as they are.

    **Returns**
    - PulseFitResult with the fitted pulse (centre on the residual's axis), its
      sum of squared errors, the window R2 and the solver's convergence flag

    **Errors**
    - InsufficientDataError: fewer than three samples inside the window
    """
    hours = residual.hours()
    mask = np.abs(hours - t_sg_fixed) <= window
    result = fit_pulse_samples(
        hours[mask],
        residual.array[mask],
        t_sg_fixed,
        init,
        config,
        free_center=free_center,
        window=window,
    )
    logger.info(
        f"pulse_fit_done center={result.pulse.center} amplitude={result.pulse.amplitude} "
        f"sigma={result.pulse.sigma} sse={result.sse} converged={result.converged}"
    )
    return result


def pulse_on_axis(pulse: EventPulse, event: EventInfo, origin: datetime) -> EventPulse:
    """Move a pulse stored as hour-of-day on the event date onto the axis anchored at `origin`."""
    return pulse.shifted(hours_between(origin, _event_midnight(event)))


def pulse_on_event_day(pulse: EventPulse, event: EventInfo, origin: datetime) -> EventPulse:
    """Inverse of `pulse_on_axis`."""
    return pulse.shifted(-hours_between(origin, _event_midnight(event)))


def _event_midnight(event: EventInfo) -> datetime:
    return event.commencement.replace(hour=0, minute=0, second=0, microsecond=0)
