import logging
from typing import Sequence, Tuple

import numpy as np
from scipy import stats

from app.pulse.schemas import EventPulse
from app.timeseries.schemas import EventInfo
from app.utils.exceptions import ArgumentError, DegenerateVarianceError, InsufficientDataError
from app.utils.validators import is_constant
from .schemas import AttendanceRegression, SigmaPrior

logger = logging.getLogger(__name__)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ArgumentError(f"pearson needs two equal-length sequences (got {a.size} and {b.size})")
    if a.size < 2:
        raise ArgumentError("pearson needs at least two points")
    if is_constant(a) or is_constant(b):
        raise DegenerateVarianceError("pearson is undefined for a constant sequence")
    r = float(stats.pearsonr(a, b).statistic)
    return min(1.0, max(-1.0, r))


def fit_attendance_regression(pairs: Sequence[Tuple[int, float]]) -> AttendanceRegression:
    """
    Ordinary least squares of pulse volume on attendance.

    **Input**
    - `pairs`: `(attendance, R_sg)` for each training event

    **Errors**
    - InsufficientDataError: fewer than two pairs or every attendance equal
    """
    if len(pairs) < 2:
        raise InsufficientDataError(f"regression needs at least two events (got {len(pairs)})")
    attendance = np.asarray([p[0] for p in pairs], dtype=float)
    volume = np.asarray([p[1] for p in pairs], dtype=float)
    if is_constant(attendance):
        raise InsufficientDataError("all training events have the same attendance")

    fit = stats.linregress(attendance, volume)
    r = pearson(attendance, volume) if not is_constant(volume) else 0.0

    regression = AttendanceRegression(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        pearson_r=r,
        n_samples=len(pairs),
    )
    logger.info(
        f"attendance_regression slope={regression.slope} intercept={regression.intercept} "
        f"pearson_r={regression.pearson_r} n={regression.n_samples}"
    )
    return regression


def fit_sigma_prior(sigmas: Sequence[float]) -> SigmaPrior:
    if len(sigmas) < 1:
        raise InsufficientDataError("sigma prior needs at least one fitted pulse")
    return SigmaPrior(mean_sigma=float(np.mean(sigmas)), n_samples=len(sigmas))


def estimate_initial_pulse(
    event: EventInfo,
    regression: AttendanceRegression,
    prior: SigmaPrior,
    kickoff_offset: float = -1.0,
) -> EventPulse:
    """Pulse expected from advance information; centre is hour-of-day of the event date."""
    return EventPulse(
        amplitude=max(0.0, regression.predict(event.attendance)),
        center=event.hour_of_day + kickoff_offset,
        sigma=prior.mean_sigma,
    )
