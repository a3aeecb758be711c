from datetime import datetime
from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.pulse.schemas import EventPulse
from app.timeseries.schemas import EventCalendar, HourlyTrafficSeries


class ForecastMode(str, Enum):
    MULTI_STEP = "multi_step"
    SINGLE_STEP = "single_step"


class ForecastRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    horizon: int = Field(ge=1)
    start: datetime
    events: EventCalendar = EventCalendar()
    mode: ForecastMode = ForecastMode.MULTI_STEP


class SingleStepState(BaseModel):
    """Rolling state of one event's pulse during single-step prediction."""

    model_config = ConfigDict(frozen=True)

    observed_residuals: Tuple[Tuple[float, float], ...] = ()
    current_pulse: EventPulse
    initial_candidates: Tuple[EventPulse, ...]
    best_sse: Optional[float] = None

    @field_validator("observed_residuals")
    @classmethod
    def validate_order(cls, residuals):
        hours = [hour for hour, _ in residuals]
        if any(b <= a for a, b in zip(hours, hours[1:])):
            raise ValueError("observed residual hours must be strictly increasing")
        return residuals

    @field_validator("initial_candidates")
    @classmethod
    def validate_candidates(cls, candidates):
        if not candidates:
            raise ValueError("at least one initial candidate is required")
        return candidates

    @property
    def initial_pulse(self) -> EventPulse:
        return self.initial_candidates[0]

    @property
    def last_hour(self) -> Optional[float]:
        return self.observed_residuals[-1][0] if self.observed_residuals else None


class Forecast(BaseModel):
    """Predicted traffic with its daily and pulse parts on one hour axis."""

    model_config = ConfigDict(frozen=True)

    predicted: HourlyTrafficSeries
    daily: HourlyTrafficSeries
    pulse: HourlyTrafficSeries
    observed: Optional[HourlyTrafficSeries] = None

    @model_validator(mode="after")
    def check_alignment(self):
        parts = [self.daily, self.pulse] + ([self.observed] if self.observed is not None else [])
        for part in parts:
            if part.start != self.predicted.start or len(part) != len(self.predicted):
                raise ValueError("forecast components must share the predicted series' hour axis")
        return self

    def with_observed(self, observed: HourlyTrafficSeries) -> "Forecast":
        return Forecast(predicted=self.predicted, daily=self.daily, pulse=self.pulse, observed=observed)
