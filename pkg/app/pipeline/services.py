import logging
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from app.baselines.schemas import ArmaOrder
from app.baselines.services import fit_arma, forecast, rolling_one_step, rolling_seasonal_naive, seasonal_naive, select_order_bic
from app.core.config import Settings
from app.core.middleware import CommandRun, run_stage
from app.daily.schemas import WeeklyFitDiagnostics
from app.daily.services import eval_weekly_series, fit_weekly
from app.data.schemas import EventFitRecord, ModelDocument
from app.data.services import ingest_tsv, read_calendar_csv, read_series_csv
from app.metrics.schemas import REPORT_COLUMNS, EvaluationReport, Timing
from app.metrics.services import evaluate, time_run
from app.predictor.schemas import Forecast, ForecastMode, ForecastRequest
from app.predictor.services import multistep_forecast, rolling_single_step
from app.pulse.schemas import EventPulse
from app.pulse.services import fit_pulse, pulse_on_event_day
from app.regression.services import fit_attendance_regression, fit_sigma_prior
from app.timeseries.schemas import EventCalendar, HourlyTrafficSeries
from app.timeseries.services import (
    event_center_hour,
    extract_residual,
    slice_series,
    split_by_events,
    trim_to_whole_days,
)
from app.utils.exceptions import ArgumentError, InsufficientDataError
from .schemas import FitSummary, RunConfig

logger = logging.getLogger(__name__)

SG_NNTP = "sg-nntp"


def parse_moment(text: str, tz_offset_hours: float) -> datetime:
    """ISO timestamp; a naive one is read in the configured UTC offset."""
    try:
        moment = datetime.fromisoformat(text)
    except ValueError:
        raise ArgumentError(f"not an ISO timestamp: {text!r}") from None
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone(timedelta(hours=tz_offset_hours)))
    return moment


def parse_order(text: str) -> Tuple[str, ArmaOrder]:
    """`arma=p,q` or `arima=p,d,q`."""
    name, sep, numbers = text.partition("=")
    try:
        parts = [int(part) for part in numbers.split(",")]
    except ValueError:
        raise ArgumentError(f"order {text!r} must be name=p,q or name=p,d,q") from None
    if not sep or len(parts) not in (2, 3):
        raise ArgumentError(f"order {text!r} must be name=p,q or name=p,d,q")
    p, d, q = (parts[0], 0, parts[1]) if len(parts) == 2 else parts
    return name.strip().lower(), ArmaOrder(p=p, d=d, q=q)


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------


def load_series(config: RunConfig, settings: Settings, run: Optional[CommandRun] = None) -> HourlyTrafficSeries:
    with run_stage(run, "data"):
        if config.series_path is not None:
            return read_series_csv(config.series_path)
        if config.tsv_path is not None:
            return ingest_tsv(config.tsv_path, config.traffic_kind, config.grid_ids, settings.tz_offset_hours)
        raise ArgumentError("no traffic input: give --series or --tsv")


def load_calendar(config: RunConfig, run: Optional[CommandRun] = None) -> EventCalendar:
    with run_stage(run, "calendar"):
        if config.calendar_path is None:
            return EventCalendar()
        return read_calendar_csv(config.calendar_path)


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _initial_amplitude(residual: HourlyTrafficSeries, center: float, window: float) -> float:
    hours = residual.hours()
    mask = np.abs(hours - center) <= window
    if mask.sum() < 2:
        return 1.0
    volume = float(trapezoid(np.clip(residual.array[mask], 0.0, None), hours[mask]))
    return volume if volume > 0 else 1.0


def run_fit(
    series: HourlyTrafficSeries,
    calendar: EventCalendar,
    settings: Settings,
    run: Optional[CommandRun] = None,
) -> Tuple[ModelDocument, FitSummary]:
    """
    Fit the full model on a training series.

    Splits the days, fits the weekly profile to the non-event days, fits one
    pulse per event to the residual around `commencement + kickoff offset`,
    then regresses pulse volume on attendance and averages the widths.
    With fewer than two events the document carries no regression.
    """
    with run_stage(run, "split"):
        series = trim_to_whole_days(series)
        calendar = calendar.within(series.start, series.end)
        split = split_by_events(series, calendar)

    with run_stage(run, "weekly"):
        weekly = fit_weekly(split.non_event_days, settings.fit_config)

    records: List[EventFitRecord] = []
    with run_stage(run, "pulse"):
        daily = eval_weekly_series(weekly.model, series.start, len(series))
        residual = extract_residual(series, daily)
        window = settings.pulse_window_hours
        for event in calendar.events:
            center = event_center_hour(event, series.origin, settings.kickoff_offset_hours)
            init = EventPulse(
                amplitude=_initial_amplitude(residual, center, window),
                center=center,
                sigma=settings.pulse_sigma_init,
            )
            result = fit_pulse(residual, center, init, settings.fit_config, window, settings.free_center)
            records.append(
                EventFitRecord(
                    info=event,
                    pulse=pulse_on_event_day(result.pulse, event, series.origin),
                    sse=result.sse,
                    converged=result.converged,
                    r2=result.r2,
                )
            )

    regression = prior = None
    with run_stage(run, "regression"):
        if records:
            prior = fit_sigma_prior([r.pulse.sigma for r in records])
        try:
            regression = fit_attendance_regression([(r.info.attendance, r.pulse.amplitude) for r in records])
        except InsufficientDataError as exc:
            logger.warning(f"regression_absent reason={exc.message}")

    doc = ModelDocument(
        weekly=weekly.model,
        weekly_fit=WeeklyFitDiagnostics(
            objective=weekly.objective,
            converged=weekly.converged,
            iterations=weekly.iterations,
            n_samples=weekly.n_samples,
            restart=weekly.restart,
        ),
        events=tuple(records),
        regression=regression,
        sigma_prior=prior,
        kickoff_offset_hours=settings.kickoff_offset_hours,
    )
    summary = FitSummary(
        non_event_days=len(split.non_event_days),
        event_days=len(split.event_days),
        events_fitted=len(records),
        weekly_rmse=weekly.rmse,
    )
    return doc, summary


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def run_predict(
    doc: ModelDocument,
    start: datetime,
    horizon: int,
    mode: ForecastMode,
    calendar: EventCalendar,
    settings: Settings,
    observed: Optional[HourlyTrafficSeries] = None,
) -> Forecast:
    """
    Forecast `horizon` hours from `start`.

    Multi-step uses only advance information; single-step rolls over the
    observed series hour by hour and needs it to cover the horizon.
    """
    if doc.events and not doc.has_event_model:
        logger.warning("model_has_no_event_regression events_will_be_ignored=true")
    end = start + timedelta(hours=horizon)
    events = calendar.within(start - timedelta(hours=settings.pulse_window_hours), end)

    if mode == ForecastMode.MULTI_STEP:
        request = ForecastRequest(horizon=horizon, start=start, events=events, mode=mode)
        result = multistep_forecast(
            doc.weekly,
            request,
            doc.regression,
            doc.sigma_prior,
            doc.kickoff_offset_hours,
            settings.pulse_window_hours,
        )
        if observed is not None:
            result = result.with_observed(slice_series(observed, start, end))
        return result

    if observed is None:
        raise ArgumentError("single-step prediction needs an observed series")
    window = slice_series(observed, start, end)
    return rolling_single_step(
        doc.weekly,
        window,
        events,
        doc.regression,
        doc.sigma_prior,
        settings.fit_config,
        kickoff_offset=doc.kickoff_offset_hours,
        window=settings.pulse_window_hours,
        candidate_count=settings.candidate_count,
        candidate_spread=settings.candidate_spread,
        onset_sigmas=settings.refit_onset_sigmas,
        min_refit_samples=settings.min_refit_samples,
    )


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def split_train_test(
    series: HourlyTrafficSeries, train_end: Optional[datetime], test_end: Optional[datetime]
) -> Tuple[HourlyTrafficSeries, HourlyTrafficSeries]:
    """Training window up to `train_end`, test window from there to `test_end` (default: one week, capped at the data)."""
    if train_end is None:
        train_end = series.end - timedelta(weeks=1)
    if test_end is None:
        test_end = min(series.end, train_end + timedelta(weeks=1))
    return slice_series(series, series.start, train_end), slice_series(series, train_end, test_end)


def _baseline_predictions(
    name: str,
    order: Optional[ArmaOrder],
    train: HourlyTrafficSeries,
    test: HourlyTrafficSeries,
    max_order: int,
) -> Tuple[str, Timing, Dict[ForecastMode, Tuple[np.ndarray, Timing]]]:
    if name == "snaive":
        multi = time_run(lambda: seasonal_naive(train, len(test)))
        single = time_run(lambda: rolling_seasonal_naive(train, test))
        return "snaive", Timing(), {
            ForecastMode.MULTI_STEP: (multi.value.array, multi.timing),
            ForecastMode.SINGLE_STEP: (single.value.array, single.timing),
        }

    d = 1 if name == "arima" else 0

    def train_model():
        chosen = order or select_order_bic(train, max_order, max_order, d)
        return fit_arma(train, chosen)

    fitted = time_run(train_model)
    model = fitted.value
    if model.explosive:
        logger.warning(f"baseline_explosive order={model.order.label}")
    multi = time_run(lambda: forecast(model, train, len(test)))
    single = time_run(lambda: rolling_one_step(model, train, test))
    return model.order.label.lower(), fitted.timing, {
        ForecastMode.MULTI_STEP: (multi.value.array, multi.timing),
        ForecastMode.SINGLE_STEP: (single.value.array, single.timing),
    }


def run_evaluate(
    series: HourlyTrafficSeries,
    calendar: EventCalendar,
    settings: Settings,
    train_end: Optional[datetime] = None,
    test_end: Optional[datetime] = None,
    baselines: Tuple[str, ...] = (),
    orders: Optional[Dict[str, ArmaOrder]] = None,
    max_order: int = 3,
    timing: bool = True,
    doc: Optional[ModelDocument] = None,
    run: Optional[CommandRun] = None,
) -> List[EvaluationReport]:
    """
    Score the model and each baseline on one train/test split, both modes.

    When `doc` is given it is used as-is and its training time reads 0;
    otherwise the model is fitted on the training window.
    `timing=False` zeroes every timing column.
    """
    orders = orders or {}
    with run_stage(run, "split"):
        train, test = split_train_test(series, train_end, test_end)
        logger.info(
            f"evaluation_split train={train.start.isoformat()}..{train.end.isoformat()} "
            f"test={test.start.isoformat()}..{test.end.isoformat()}"
        )

    fit_timing = Timing()
    if doc is None:
        fitted = time_run(lambda: run_fit(train, calendar.within(train.start, train.end), settings, run))
        doc, fit_timing = fitted.value[0], fitted.timing

    rows: List[Tuple[str, ForecastMode, np.ndarray, Timing, Timing]] = []
    with run_stage(run, "predict"):
        for mode in ForecastMode:
            predicted = time_run(
                lambda: run_predict(doc, test.start, len(test), mode, calendar, settings, observed=test)
            )
            rows.append((SG_NNTP, mode, predicted.value.predicted.array, fit_timing, predicted.timing))

    with run_stage(run, "baseline"):
        for name in baselines:
            label, train_timing, outputs = _baseline_predictions(name, orders.get(name), train, test, max_order)
            for mode, (values, predict_timing) in outputs.items():
                rows.append((label, mode, values, train_timing, predict_timing))

    reports: List[EvaluationReport] = []
    with run_stage(run, "evaluate"):
        for label, mode, values, train_timing, predict_timing in rows:
            if not timing:
                train_timing = predict_timing = Timing()
            reports.append(evaluate(label, mode.value, test.array, values, train_timing, predict_timing))
    return reports


def write_report_csv(reports: List[EvaluationReport], path: Path) -> Path:
    frame = pd.DataFrame([report.csv_fields() for report in reports], columns=list(REPORT_COLUMNS))
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.info(f"report_written path={path} rows={len(frame)}")
    return Path(path)
