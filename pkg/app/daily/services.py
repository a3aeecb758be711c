import logging
import math
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from app.timeseries.schemas import DaySegment, HourlyTrafficSeries
from app.timeseries.services import calendar_index
from app.utils.exceptions import ArgumentError, InsufficientDataError
from app.utils.least_squares import SolverResult, minimize_squares
from .schemas import (
    ANCHOR_HOURS,
    SIGMA_MAX,
    SIGMA_MIN,
    ComponentLabel,
    DayClass,
    FitConfig,
    GaussianComponent,
    WeeklyFitResult,
    WeeklyProfileModel,
    day_class_of,
)

logger = logging.getLogger(__name__)

WEEK_HOURS = 168
CENTER_DRIFT = 12.0  # t_c stays within +-12 h of its anchor during fitting


def _component_offsets(label: ComponentLabel) -> np.ndarray:
    days = day_class_of(label).day_indices
    return np.array(
        [24.0 * (day - 1) + wrap for day in days for wrap in (-WEEK_HOURS, 0.0, WEEK_HOURS)],
        dtype=float,
    )


_OFFSETS = tuple(_component_offsets(label) for label in ComponentLabel)


def weekly_kernel(params: np.ndarray, weekly_hours: np.ndarray, jacobian: bool = False):
    """
    Evaluate the weekly profile at absolute weekly hours `T = 24(k-1) + t`.

    Returns `(values, J)` where `J[:, 3i:3i+3]` holds the partials with
    respect to `(R, t_c, sigma)` of component `i`; `J` is None unless requested.
    """
    hours = np.atleast_1d(np.asarray(weekly_hours, dtype=float))
    values = np.zeros(hours.size)
    jac = np.zeros((hours.size, params.size)) if jacobian else None

    for i, offsets in enumerate(_OFFSETS):
        peak, center, sigma = params[3 * i : 3 * i + 3]
        u = hours[:, None] - (offsets[None, :] + center)
        e = np.exp(-(u * u) / (2.0 * sigma * sigma))
        s0 = e.sum(axis=1)
        values += peak * s0
        if jacobian:
            jac[:, 3 * i] = s0
            jac[:, 3 * i + 1] = peak * (e * u).sum(axis=1) / sigma**2
            jac[:, 3 * i + 2] = peak * (e * u * u).sum(axis=1) / sigma**3

    return values, jac


def eval_component(component: GaussianComponent, t: float) -> float:
    return component.peak * math.exp(-((t - component.center) ** 2) / (2.0 * component.sigma**2))


def eval_day(model: WeeklyProfileModel, day_labels: Iterable[ComponentLabel], t: float) -> float:
    labels = {ComponentLabel(label) for label in day_labels}
    if not any(labels == set(day_class.labels) for day_class in DayClass):
        raise ArgumentError(f"{sorted(l.value for l in labels)} is not a day's component triple")
    return sum(eval_component(model.component(label), t) for label in labels)


def _check_day(k: int) -> None:
    if isinstance(k, bool) or int(k) != k or not 1 <= k <= 7:
        raise ArgumentError(f"day index must be 1..7 (got {k})")


def eval_week(model: WeeklyProfileModel, k: int, t: float) -> float:
    _check_day(k)
    params = np.asarray(model.to_vector())
    values, _ = weekly_kernel(params, np.array([24.0 * (k - 1) + t]))
    return float(values[0])


def weekly_hours_from(start: datetime, length: int) -> np.ndarray:
    first = calendar_index(start).weekly_hour
    return ((first + np.arange(length)) % WEEK_HOURS).astype(float)


def eval_weekly_series(model: WeeklyProfileModel, start: datetime, length: int) -> HourlyTrafficSeries:
    """Sample the weekly profile on the hour axis of a series starting at `start`."""
    params = np.asarray(model.to_vector())
    values, _ = weekly_kernel(params, weekly_hours_from(start, length))
    return HourlyTrafficSeries.from_array(start, values)


def _check_coverage(days: Sequence[DaySegment]) -> None:
    covered = {segment.k for segment in days}
    for day_class in DayClass:
        if not covered.intersection(day_class.day_indices):
            raise InsufficientDataError(f"no non-event {day_class.value} in the training data")

    missing = sorted(set(range(1, 8)) - covered)
    if missing:
        logger.warning(f"weekly_fit_partial_coverage missing_days={missing}")


def _initial_vector(hours: np.ndarray, y: np.ndarray) -> np.ndarray:
    hour_of_day = hours % 24
    day = (hours // 24).astype(int) + 1
    vector: List[float] = []
    for label in ComponentLabel:
        day_class = day_class_of(label)
        anchor = ANCHOR_HOURS[day_class.labels.index(label)]
        mask = np.isin(day, day_class.day_indices) & (hour_of_day == anchor)
        peak = float(y[mask].mean()) if mask.any() else 0.0
        vector.extend((max(peak, 0.0), anchor, 2.0))
    return np.asarray(vector)


def _bounds() -> Tuple[np.ndarray, np.ndarray]:
    lower: List[float] = []
    upper: List[float] = []
    for label in ComponentLabel:
        day_class = day_class_of(label)
        anchor = ANCHOR_HOURS[day_class.labels.index(label)]
        lower.extend((0.0, anchor - CENTER_DRIFT, SIGMA_MIN))
        upper.extend((np.inf, anchor + CENTER_DRIFT, SIGMA_MAX))
    return np.asarray(lower), np.asarray(upper)


def _jitter(x0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    x = x0.copy()
    x[0::3] *= rng.uniform(0.8, 1.2, size=len(ComponentLabel))
    x[1::3] += rng.uniform(-1.0, 1.0, size=len(ComponentLabel))
    x[2::3] *= rng.uniform(0.75, 1.25, size=len(ComponentLabel))
    return x


def fit_weekly(non_event_days: Sequence[DaySegment], config: FitConfig) -> WeeklyFitResult:
    """
    Fit the nine-component weekly profile to non-event days by least squares.

    Every available day contributes its 24 samples (hours 0..23) to the
    objective, weeks are pooled rather than averaged. `config.restarts`
    runs start from the anchored initialisation (first run) and jittered
    copies of it; the lowest objective wins.

    **Errors**
    - InsufficientDataError: no days, or a day class (weekday, Saturday, Sunday) without coverage
    """
    if not non_event_days:
        raise InsufficientDataError("no non-event days to fit the weekly profile")
    _check_coverage(non_event_days)

    hours = np.concatenate([24.0 * (seg.k - 1) + np.arange(24.0) for seg in non_event_days])
    y = np.concatenate([seg.series.array for seg in non_event_days])

    def residual(x: np.ndarray):
        values, jac = weekly_kernel(x, hours, jacobian=True)
        return values - y, jac

    lower, upper = _bounds()
    x0 = _initial_vector(hours, y)
    rng = np.random.default_rng(config.seed)
    starts = [x0] + [_jitter(x0, rng) for _ in range(config.restarts - 1)]

    def run(start: np.ndarray) -> SolverResult:
        return minimize_squares(residual, start, lower, upper, config)

    with ThreadPoolExecutor(max_workers=min(len(starts), 4)) as pool:
        results = list(pool.map(run, starts))

    best_index = min(range(len(results)), key=lambda i: results[i].objective)
    best = results[best_index]
    for i, result in enumerate(results):
        logger.debug(
            f"weekly_fit_restart restart={i} objective={result.objective} iterations={result.iterations} converged={result.converged}"
        )

    model = WeeklyProfileModel.from_vector(best.x)
    logger.info(
        f"weekly_fit_done objective={best.objective} samples={y.size} iterations={best.iterations} "
        f"converged={best.converged} restart={best_index}"
    )
    return WeeklyFitResult(
        model=model,
        objective=best.objective,
        converged=best.converged,
        iterations=best.iterations,
        n_samples=int(y.size),
        history=best.history,
        restart=best_index,
    )
