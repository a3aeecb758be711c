from typing import Any, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

REPORT_COLUMNS: Tuple[str, ...] = (
    "model",
    "mode",
    "n",
    "mse",
    "rmse",
    "mae",
    "r2",
    "train_ms",
    "predict_ms",
    "cpu_train_ms",
    "cpu_predict_ms",
)


class Timing(BaseModel):
    model_config = ConfigDict(frozen=True)

    wall_ms: float = Field(default=0.0, ge=0.0)
    cpu_ms: float = Field(default=0.0, ge=0.0)


class TimedResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: Any = None
    timing: Timing

    @property
    def elapsed_ms(self) -> float:
        return self.timing.wall_ms


class EvaluationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: str
    mode: str
    n: int = Field(ge=1)
    mse: float = Field(ge=0.0)
    rmse: float = Field(ge=0.0)
    mae: float = Field(ge=0.0)
    r2: float = Field(le=1.0)
    elapsed_train_ms: float = Field(default=0.0, ge=0.0)
    elapsed_predict_ms: float = Field(default=0.0, ge=0.0)
    cpu_train_ms: float = Field(default=0.0, ge=0.0)
    cpu_predict_ms: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def check_rmse(self):
        if abs(self.rmse**2 - self.mse) > 1e-12 * max(self.mse, 1e-300):
            raise ValueError(f"rmse^2 ({self.rmse**2}) does not match mse ({self.mse})")
        return self

    def csv_fields(self) -> Tuple[Any, ...]:
        return (
            self.model,
            self.mode,
            self.n,
            self.mse,
            self.rmse,
            self.mae,
            self.r2,
            self.elapsed_train_ms,
            self.elapsed_predict_ms,
            self.cpu_train_ms,
            self.cpu_predict_ms,
        )
