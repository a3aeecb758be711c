import functools
import logging
import uuid
from contextlib import contextmanager, nullcontext

import typer
from pydantic import ValidationError

from app.utils.exceptions import NNTPError

logger = logging.getLogger(__name__)


class CommandRun:
    """One CLI invocation; tags every stage log line with the same run id."""

    def __init__(self, command: str):
        self.command = command
        self.run_id = uuid.uuid4().hex[:8]

    @contextmanager
    def stage(self, name: str):
        logger.info(f"[RUN {self.run_id}] command={self.command} stage={name} start")
        try:
            yield
        except NNTPError as exc:
            if exc.stage is None:
                exc.stage = name
            logger.error(f"[RUN {self.run_id}] stage={exc.stage} failed error={type(exc).__name__}")
            raise
        except ValidationError as exc:
            first = exc.errors()[0]
            message = f"{exc.title}: {first['msg']}"
            logger.error(f"[RUN {self.run_id}] stage={name} failed error=ValidationError")
            raise NNTPError(message, stage=name) from exc
        except OSError as exc:
            message = f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc)
            logger.error(f"[RUN {self.run_id}] stage={name} failed error={type(exc).__name__}")
            raise NNTPError(message, stage=name) from exc
        logger.info(f"[RUN {self.run_id}] stage={name} done")


def run_stage(run, name: str):
    """`run.stage(name)`, or a no-op when the caller is not a CLI command."""
    return run.stage(name) if run is not None else nullcontext()


def stage_errors(command):
    """Turn a stage failure into one `[stage] message` line on stderr and exit code 1."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except NNTPError as exc:
            typer.echo(f"[{exc.stage or 'error'}] {exc.message}", err=True)
            raise typer.Exit(code=1)

    return wrapper
