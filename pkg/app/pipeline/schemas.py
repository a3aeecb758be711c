from datetime import datetime
from pathlib import Path
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.baselines.schemas import ArmaOrder
from app.data.schemas import TrafficKind
from app.predictor.schemas import ForecastMode

BASELINES = ("arma", "arima", "snaive")


class RunConfig(BaseModel):
    """Flags of one command with every path made absolute."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: str
    series_path: Optional[Path] = None
    tsv_path: Optional[Path] = None
    traffic_kind: TrafficKind = TrafficKind.SMS_IN
    grid_ids: Tuple[int, ...] = ()
    calendar_path: Optional[Path] = None
    model_path: Optional[Path] = None
    observed_path: Optional[Path] = None
    output_path: Optional[Path] = None
    out_dir: Optional[Path] = None
    train_end: Optional[datetime] = None
    test_end: Optional[datetime] = None
    start: Optional[datetime] = None
    horizon: int = Field(default=168, ge=1)
    mode: ForecastMode = ForecastMode.MULTI_STEP
    baselines: Tuple[str, ...] = ()
    orders: Dict[str, ArmaOrder] = {}
    max_order: int = Field(default=3, ge=1, le=5)
    timing: bool = True
    weeks: int = Field(default=3, ge=1)
    noise_fraction: float = Field(default=0.05, ge=0.0)

    @field_validator("series_path", "tsv_path", "calendar_path", "model_path", "observed_path", "output_path", "out_dir")
    @classmethod
    def resolve_path(cls, path: Optional[Path]) -> Optional[Path]:
        return path.expanduser().resolve() if path is not None else None

    @field_validator("baselines")
    @classmethod
    def validate_baselines(cls, baselines: Tuple[str, ...]) -> Tuple[str, ...]:
        unknown = [b for b in baselines if b not in BASELINES]
        if unknown:
            raise ValueError(f"unknown baseline {unknown[0]!r} (choose from {', '.join(BASELINES)})")
        return tuple(dict.fromkeys(baselines))

    @field_validator("orders")
    @classmethod
    def validate_orders(cls, orders: Dict[str, ArmaOrder]) -> Dict[str, ArmaOrder]:
        for name, order in orders.items():
            expected_d = {"arma": 0, "arima": 1}.get(name)
            if expected_d is None:
                raise ValueError(f"--order names arma or arima (got {name!r})")
            if order.d != expected_d:
                raise ValueError(f"{name} order needs d={expected_d} (got {order.label})")
        return orders

    @model_validator(mode="after")
    def check_sources(self):
        if self.series_path is not None and self.tsv_path is not None:
            raise ValueError("give either --series or --tsv, not both")
        if self.tsv_path is not None and not self.grid_ids:
            raise ValueError("--tsv needs at least one --grid")
        if self.train_end and self.test_end and self.test_end <= self.train_end:
            raise ValueError("--test-end must come after --train-end")
        return self


class FitSummary(BaseModel):
    """What `fit` reports besides the model document."""

    model_config = ConfigDict(frozen=True)

    non_event_days: int
    event_days: int
    events_fitted: int
    weekly_rmse: float
