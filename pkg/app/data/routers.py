import logging
from pathlib import Path
from typing import Annotated

import typer
from rich.console import Console
from rich.table import Table

from app.core.dependencies import get_settings
from app.core.middleware import CommandRun, stage_errors
from app.pipeline.schemas import RunConfig
from .services import default_synthetic_spec, generate_synthetic, save_model, write_calendar_csv, write_series_csv

logger = logging.getLogger(__name__)
router = typer.Typer()
console = Console()

SERIES_FILE = "series.csv"
CALENDAR_FILE = "calendar.csv"
TRUTH_FILE = "truth.model"


@router.command("synth")
@stage_errors
def synth(
    ctx: typer.Context,
    out_dir: Annotated[Path, typer.Option("--out-dir", help="Directory for series.csv, calendar.csv and truth.model")] = Path("synthetic"),
    weeks: Annotated[int, typer.Option("--weeks", help="Weeks of hourly traffic")] = 3,
    noise: Annotated[float, typer.Option("--noise", help="Noise sd as a fraction of the largest daily peak")] = 0.05,
):
    """
    Write the reference synthetic corpus.

    **Outputs**
    - series.csv: `timestamp,value` hourly traffic
    - calendar.csv: `commencement,duration_hours,kind,attendance`
    - truth.model: the generating weekly profile and pulses

    Identical flags and `--seed` give byte-identical files.
    """
    run = CommandRun("synth")
    settings = get_settings(ctx)
    with run.stage("config"):
        config = RunConfig(command="synth", out_dir=out_dir, weeks=weeks, noise_fraction=noise)

    with run.stage("data"):
        spec = default_synthetic_spec(weeks=config.weeks, noise_fraction=config.noise_fraction, seed=settings.seed)
        series, calendar, truth = generate_synthetic(spec)

    with run.stage("output"):
        config.out_dir.mkdir(parents=True, exist_ok=True)
        written = [
            write_series_csv(series, config.out_dir / SERIES_FILE),
            write_calendar_csv(calendar, config.out_dir / CALENDAR_FILE),
            save_model(truth, config.out_dir / TRUTH_FILE),
        ]

    table = Table(title="synthetic corpus")
    table.add_column("file")
    table.add_column("content")
    table.add_row(str(written[0]), f"{len(series)} hours from {series.start.isoformat()}")
    table.add_row(str(written[1]), f"{len(calendar)} events")
    table.add_row(str(written[2]), "ground truth")
    console.print(table)
