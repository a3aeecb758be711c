import logging
import math
import time
from typing import Callable, Optional, TypeVar

from sklearn.metrics import mean_absolute_error, mean_squared_error, r2_score

from app.utils.exceptions import DegenerateVarianceError
from app.utils.validators import is_constant, paired_arrays
from .schemas import EvaluationReport, TimedResult, Timing

logger = logging.getLogger(__name__)

T = TypeVar("T")


def mse(actual, predicted) -> float:
    a, b = paired_arrays(actual, predicted)
    return float(mean_squared_error(a, b))


def rmse(actual, predicted) -> float:
    return math.sqrt(mse(actual, predicted))


def mae(actual, predicted) -> float:
    a, b = paired_arrays(actual, predicted)
    return float(mean_absolute_error(a, b))


def r2(actual, predicted) -> float:
    """Coefficient of determination; a constant `actual` has no variance to explain and is an error."""
    a, b = paired_arrays(actual, predicted)
    if a.size < 2 or is_constant(a):
        raise DegenerateVarianceError("R2 is undefined for constant observations")
    return float(r2_score(a, b))


def time_run(task: Callable[[], T]) -> TimedResult:
    """Run `task` once and record wall-clock (monotonic) and process CPU time in milliseconds."""
    wall_start = time.perf_counter_ns()
    cpu_start = time.process_time_ns()
    value = task()
    cpu_ms = (time.process_time_ns() - cpu_start) / 1e6
    wall_ms = (time.perf_counter_ns() - wall_start) / 1e6
    return TimedResult(value=value, timing=Timing(wall_ms=wall_ms, cpu_ms=cpu_ms))


def evaluate(
    model: str,
    mode: str,
    actual,
    predicted,
    train: Optional[Timing] = None,
    predict: Optional[Timing] = None,
) -> EvaluationReport:
    train = train or Timing()
    predict = predict or Timing()
    error = mse(actual, predicted)
    report = EvaluationReport(
        model=model,
        mode=mode,
        n=len(actual),
        mse=error,
        rmse=math.sqrt(error),
        mae=mae(actual, predicted),
        r2=r2(actual, predicted),
        elapsed_train_ms=train.wall_ms,
        elapsed_predict_ms=predict.wall_ms,
        cpu_train_ms=train.cpu_ms,
        cpu_predict_ms=predict.cpu_ms,
    )
    logger.info(f"evaluation model={model} mode={mode} n={report.n} rmse={report.rmse} r2={report.r2}")
    return report
