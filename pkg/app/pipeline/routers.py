import logging
from pathlib import Path
from typing import Annotated, List, Optional

import typer
from rich.console import Console
from rich.table import Table

from app.core.config import Settings
from app.core.dependencies import get_settings
from app.core.middleware import CommandRun, stage_errors
from app.data.schemas import ModelDocument, TrafficKind
from app.data.services import export_forecast_csv, load_model, save_model
from app.metrics.schemas import EvaluationReport
from app.predictor.schemas import ForecastMode
from app.timeseries.services import slice_series
from app.utils.exceptions import ArgumentError
from .schemas import FitSummary, RunConfig
from .services import (
    load_calendar,
    load_series,
    parse_moment,
    parse_order,
    run_evaluate,
    run_fit,
    run_predict,
    write_report_csv,
)

logger = logging.getLogger(__name__)
router = typer.Typer()
console = Console()

SeriesOption = Annotated[Optional[Path], typer.Option("--series", help="Hourly `timestamp,value` CSV")]
TsvOption = Annotated[Optional[Path], typer.Option("--tsv", help="Ten-minute grid records (tab-separated)")]
KindOption = Annotated[TrafficKind, typer.Option("--kind", help="Traffic column summed from --tsv")]
GridOption = Annotated[Optional[List[int]], typer.Option("--grid", help="Grid square kept from --tsv (repeatable)")]
CalendarOption = Annotated[Optional[Path], typer.Option("--calendar", help="Event calendar CSV")]


def _moment(text: Optional[str], settings: Settings):
    return parse_moment(text, settings.tz_offset_hours) if text else None


def _print_fit(doc: ModelDocument, summary: FitSummary) -> None:
    table = Table(title="fit diagnostics")
    table.add_column("item")
    table.add_column("value", justify="right")
    table.add_row("non-event days", str(summary.non_event_days))
    table.add_row("event days", str(summary.event_days))
    table.add_row("weekly rmse", f"{summary.weekly_rmse:.4f}")
    if doc.weekly_fit is not None:
        table.add_row("weekly converged", str(doc.weekly_fit.converged))
        table.add_row("weekly iterations", str(doc.weekly_fit.iterations))
    if doc.regression is not None:
        table.add_row("slope", f"{doc.regression.slope:.6g}")
        table.add_row("intercept", f"{doc.regression.intercept:.6g}")
        table.add_row("pearson r", f"{doc.regression.pearson_r:.4f}")
    if doc.sigma_prior is not None:
        table.add_row("mean sigma", f"{doc.sigma_prior.mean_sigma:.4f}")
    console.print(table)
    _print_events(doc)


def _print_events(doc: ModelDocument) -> None:
    if not doc.events:
        return
    table = Table(title="event pulses")
    for column in ("commencement", "kind", "attendance", "R_sg", "t_sg", "sigma", "r2"):
        table.add_column(column)
    for record in doc.events:
        table.add_row(
            record.info.commencement.isoformat(),
            record.info.kind,
            str(record.info.attendance),
            f"{record.pulse.amplitude:.1f}",
            f"{record.pulse.center:.2f}",
            f"{record.pulse.sigma:.3f}",
            f"{record.r2:.3f}" if record.r2 is not None else "-",
        )
    console.print(table)


def _print_reports(reports: List[EvaluationReport]) -> None:
    table = Table(title="evaluation")
    for column in ("model", "mode", "rmse", "mae", "r2", "train ms", "predict ms"):
        table.add_column(column)
    for report in reports:
        table.add_row(
            report.model,
            report.mode,
            f"{report.rmse:.3f}",
            f"{report.mae:.3f}",
            f"{report.r2:.4f}",
            f"{report.elapsed_train_ms:.1f}",
            f"{report.elapsed_predict_ms:.1f}",
        )
    console.print(table)


@router.command("fit")
@stage_errors
def fit(
    ctx: typer.Context,
    output: Annotated[Path, typer.Option("--output", "-o", help="Model document to write")],
    series: SeriesOption = None,
    tsv: TsvOption = None,
    kind: KindOption = TrafficKind.SMS_IN,
    grid: GridOption = None,
    calendar: CalendarOption = None,
    train_end: Annotated[Optional[str], typer.Option("--train-end", help="Fit only data before this ISO time")] = None,
):
    """
    Fit the weekly profile, one pulse per event, and the attendance regression.

    **Errors**
    - exit 1 with `[stage] message` on stderr when any stage fails
    """
    run = CommandRun("fit")
    settings = get_settings(ctx)
    with run.stage("config"):
        config = RunConfig(
            command="fit",
            series_path=series,
            tsv_path=tsv,
            traffic_kind=kind,
            grid_ids=tuple(grid or ()),
            calendar_path=calendar,
            output_path=output,
            train_end=_moment(train_end, settings),
        )

    traffic = load_series(config, settings, run)
    events = load_calendar(config, run)
    if config.train_end is not None:
        with run.stage("split"):
            traffic = slice_series(traffic, traffic.start, config.train_end)
    if not events.events:
        logger.warning("fit_without_events regression=absent")

    doc, summary = run_fit(traffic, events, settings, run)
    with run.stage("output"):
        save_model(doc, config.output_path)
    _print_fit(doc, summary)


@router.command("predict")
@stage_errors
def predict(
    ctx: typer.Context,
    model: Annotated[Path, typer.Option("--model", "-m", help="Model document from `fit`")],
    output: Annotated[Path, typer.Option("--output", "-o", help="Forecast CSV to write")],
    start: Annotated[Optional[str], typer.Option("--start", help="First forecast hour (ISO); defaults to the observed start")] = None,
    horizon: Annotated[int, typer.Option("--horizon", help="Hours to forecast")] = 168,
    mode: Annotated[ForecastMode, typer.Option("--mode")] = ForecastMode.MULTI_STEP,
    calendar: CalendarOption = None,
    observed: Annotated[Optional[Path], typer.Option("--observed", help="Observed series CSV (required for single_step)")] = None,
):
    """Forecast from a fitted model: `multi_step` from advance information, `single_step` rolling over observations."""
    run = CommandRun("predict")
    settings = get_settings(ctx)
    with run.stage("config"):
        config = RunConfig(
            command="predict",
            model_path=model,
            output_path=output,
            start=_moment(start, settings),
            horizon=horizon,
            mode=mode,
            calendar_path=calendar,
            observed_path=observed,
        )
        if config.mode == ForecastMode.SINGLE_STEP and config.observed_path is None:
            raise ArgumentError("single_step needs --observed")

    with run.stage("model"):
        doc = load_model(config.model_path)
    events = load_calendar(config, run)
    observed_series = None
    if config.observed_path is not None:
        observed_series = load_series(config.model_copy(update={"series_path": config.observed_path}), settings, run)

    with run.stage("predict"):
        first = config.start or (observed_series.start if observed_series is not None else None)
        if first is None:
            raise ArgumentError("give --start or --observed")
        result = run_predict(doc, first, config.horizon, config.mode, events, settings, observed_series)

    with run.stage("output"):
        export_forecast_csv(result, config.output_path)
    console.print(f"wrote {len(result.predicted)} hours to {config.output_path}")


@router.command("evaluate")
@stage_errors
def evaluate(
    ctx: typer.Context,
    output: Annotated[Path, typer.Option("--output", "-o", help="Report CSV to write")],
    series: SeriesOption = None,
    tsv: TsvOption = None,
    kind: KindOption = TrafficKind.SMS_IN,
    grid: GridOption = None,
    calendar: CalendarOption = None,
    model: Annotated[Optional[Path], typer.Option("--model", "-m", help="Use this model instead of fitting on the training window")] = None,
    train_end: Annotated[Optional[str], typer.Option("--train-end", help="End of training window (ISO), e.g. 2013-12-16T00:00+01:00")] = None,
    test_end: Annotated[Optional[str], typer.Option("--test-end", help="End of test window (ISO), e.g. 2013-12-23T00:00+01:00")] = None,
    baseline: Annotated[Optional[List[str]], typer.Option("--baseline", help="arma, arima or snaive (repeatable)")] = None,
    order: Annotated[Optional[List[str]], typer.Option("--order", help="Pin an order, e.g. arma=1,2 or arima=3,1,1")] = None,
    max_order: Annotated[int, typer.Option("--max-order", help="Largest p and q tried by BIC selection")] = 3,
    no_timing: Annotated[bool, typer.Option("--no-timing", help="Write zero timings for reproducible reports")] = False,
):
    """Score the model and the chosen baselines on one train/test split in both prediction modes."""
    run = CommandRun("evaluate")
    settings = get_settings(ctx)
    with run.stage("config"):
        config = RunConfig(
            command="evaluate",
            series_path=series,
            tsv_path=tsv,
            traffic_kind=kind,
            grid_ids=tuple(grid or ()),
            calendar_path=calendar,
            model_path=model,
            output_path=output,
            train_end=_moment(train_end, settings),
            test_end=_moment(test_end, settings),
            baselines=tuple(baseline or ()),
            orders=dict(parse_order(text) for text in order or ()),
            max_order=max_order,
            timing=not no_timing,
        )

    traffic = load_series(config, settings, run)
    events = load_calendar(config, run)
    doc = None
    if config.model_path is not None:
        with run.stage("model"):
            doc = load_model(config.model_path)

    reports = run_evaluate(
        traffic,
        events,
        settings,
        train_end=config.train_end,
        test_end=config.test_end,
        baselines=config.baselines,
        orders=config.orders,
        max_order=config.max_order,
        timing=config.timing,
        doc=doc,
        run=run,
    )
    with run.stage("output"):
        write_report_csv(reports, config.output_path)
    _print_reports(reports)


@router.command("show")
@stage_errors
def show(model: Annotated[Path, typer.Option("--model", "-m", help="Model document to print")]):
    """Print a model document."""
    run = CommandRun("show")
    with run.stage("model"):
        doc = load_model(model)

    table = Table(title=f"weekly profile ({model.name})")
    for column in ("component", "R", "t", "sigma"):
        table.add_column(column)
    for component in doc.weekly.components:
        table.add_row(
            component.label.value,
            f"{component.peak:.3f}",
            f"{component.center:.3f}",
            f"{component.sigma:.3f}",
        )
    console.print(table)
    _print_events(doc)
    if doc.regression is not None:
        console.print(
            f"regression: R_sg = {doc.regression.slope:.6g} * attendance + {doc.regression.intercept:.6g} "
            f"(r = {doc.regression.pearson_r:.4f}, n = {doc.regression.n_samples})"
        )
