from datetime import datetime, timedelta
from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.daily.schemas import WeeklyFitDiagnostics, WeeklyProfileModel
from app.pulse.schemas import EventPulse
from app.regression.schemas import AttendanceRegression, SigmaPrior
from app.timeseries.schemas import EventCalendar, EventInfo

MODEL_FORMAT = "nntp-model"
MODEL_VERSION = 1

TSV_COLUMNS = ("square_id", "epoch_ms", "country_code", "sms_in", "sms_out", "call_in", "call_out", "internet")
INTERVAL_MS = 600_000


class TrafficKind(str, Enum):
    SMS_IN = "sms_in"
    SMS_OUT = "sms_out"
    CALL_IN = "call_in"
    CALL_OUT = "call_out"
    INTERNET = "internet"


class GridTrafficRecord(BaseModel):
    """One ten-minute activity record of one grid square."""

    model_config = ConfigDict(frozen=True)

    square_id: int
    epoch_ms: int
    sms_in: Optional[float] = Field(default=None, ge=0.0)
    sms_out: Optional[float] = Field(default=None, ge=0.0)
    call_in: Optional[float] = Field(default=None, ge=0.0)
    call_out: Optional[float] = Field(default=None, ge=0.0)
    internet: Optional[float] = Field(default=None, ge=0.0)

    @field_validator("epoch_ms")
    @classmethod
    def validate_epoch(cls, epoch_ms: int) -> int:
        if epoch_ms % INTERVAL_MS:
            raise ValueError(f"epoch_ms must start a ten-minute interval (got {epoch_ms})")
        return epoch_ms

    @model_validator(mode="after")
    def check_traffic(self):
        if all(getattr(self, kind.value) is None for kind in TrafficKind):
            raise ValueError("a record needs at least one traffic field")
        return self

    def value(self, kind: TrafficKind) -> float:
        return getattr(self, kind.value) or 0.0


class SyntheticEvent(BaseModel):
    """
    An event of the synthetic corpus.

    `pulse` is given as hour-of-day on the event date; when absent the
    corpus' regression and sigma prior shape it.
    """

    model_config = ConfigDict(frozen=True)

    info: EventInfo
    pulse: Optional[EventPulse] = None


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    weekly: WeeklyProfileModel
    events: Tuple[SyntheticEvent, ...] = ()
    noise_fraction: float = Field(default=0.0, ge=0.0)
    seed: int = 0
    weeks: int = Field(default=1, ge=1)
    start: datetime
    regression: Optional[AttendanceRegression] = None
    sigma_prior: Optional[SigmaPrior] = None
    kickoff_offset_hours: float = -1.0

    @field_validator("start")
    @classmethod
    def validate_start(cls, start: datetime) -> datetime:
        if start.tzinfo is None or start.utcoffset() is None:
            raise ValueError("synthetic start must carry a UTC offset")
        if (start.hour, start.minute, start.second, start.microsecond) != (0, 0, 0, 0):
            raise ValueError(f"synthetic start must be a local midnight (got {start.isoformat()})")
        return start

    @model_validator(mode="after")
    def check_events(self):
        end = self.start + timedelta(weeks=self.weeks)
        for event in self.events:
            if not self.start <= event.info.commencement < end:
                raise ValueError(f"event {event.info.commencement.isoformat()} lies outside the synthetic span")
            if event.pulse is None and (self.regression is None or self.sigma_prior is None):
                raise ValueError("events without a pulse need a regression and a sigma prior")
        EventCalendar(events=tuple(e.info for e in self.events))
        return self

    @property
    def length(self) -> int:
        return 168 * self.weeks


class EventFitRecord(BaseModel):
    """A fitted (or ground-truth) pulse with its event; the pulse centre is hour-of-day on the event date."""

    model_config = ConfigDict(frozen=True)

    info: EventInfo
    pulse: EventPulse
    sse: Optional[float] = Field(default=None, ge=0.0)
    converged: Optional[bool] = None
    r2: Optional[float] = Field(default=None, le=1.0)


class ModelDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: int = MODEL_VERSION
    weekly: WeeklyProfileModel
    weekly_fit: Optional[WeeklyFitDiagnostics] = None
    events: Tuple[EventFitRecord, ...] = ()
    regression: Optional[AttendanceRegression] = None
    sigma_prior: Optional[SigmaPrior] = None
    kickoff_offset_hours: float = -1.0

    @property
    def calendar(self) -> EventCalendar:
        return EventCalendar(events=tuple(record.info for record in self.events))

    @property
    def has_event_model(self) -> bool:
        return self.regression is not None and self.sigma_prior is not None
