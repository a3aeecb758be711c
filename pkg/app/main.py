import os
from pathlib import Path
from typing import Annotated, Optional

import typer
from dotenv import load_dotenv

from app.core.config import load_settings
from app.core.middleware import stage_errors
from app.utils.logging_config import setup_logging
from .data import routers as data_router
from .pipeline import routers as pipeline_router

app = typer.Typer(
    name="nntp",
    help="Event-aware cellular traffic prediction: weekly profile plus event pulses.",
    no_args_is_help=True,
    add_completion=False,
)

app.add_typer(data_router.router)
app.add_typer(pipeline_router.router)


@app.callback()
@stage_errors
def main(
    ctx: typer.Context,
    config: Annotated[Optional[Path], typer.Option("--config", help="YAML settings file")] = None,
    seed: Annotated[Optional[int], typer.Option("--seed", help="Seed for synthetic data and fit restarts")] = None,
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging")] = False,
):
    load_dotenv()
    level = "DEBUG" if verbose else os.getenv("LOG_LEVEL", "INFO")
    fmt = "json" if os.getenv("environment") == "production" else "default"
    setup_logging(level, fmt)
    ctx.obj = load_settings(config, seed=seed)


if __name__ == "__main__":
    app()
