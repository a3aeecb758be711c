from datetime import date, datetime, timedelta
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.utils.validators import finite_values


class HourlyTrafficSeries(BaseModel):
    """Hour-aligned, gap-free traffic samples starting at `start`.

    `start` carries the series' fixed UTC offset; day boundaries and
    hour-of-day are read in that offset.
    """

    model_config = ConfigDict(frozen=True)

    start: datetime
    values: Tuple[float, ...]

    @field_validator("start")
    @classmethod
    def validate_start(cls, start: datetime) -> datetime:
        if start.tzinfo is None or start.utcoffset() is None:
            raise ValueError("Series start must carry a UTC offset.")
        if start.minute or start.second or start.microsecond:
            raise ValueError(f"Series start must be hour-aligned (got {start.isoformat()}).")
        return start

    @field_validator("values")
    @classmethod
    def validate_values(cls, values: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(values) < 1:
            raise ValueError("A series needs at least one sample.")
        return finite_values(values)

    @classmethod
    def from_array(cls, start: datetime, values: Sequence[float]) -> "HourlyTrafficSeries":
        return cls(start=start, values=tuple(float(v) for v in np.asarray(values, dtype=float)))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def end(self) -> datetime:
        """Exclusive end: the hour after the last sample."""
        return self.start + timedelta(hours=len(self.values))

    @property
    def origin(self) -> datetime:
        """Local midnight of the first sample's day; hour axis zero."""
        return self.start.replace(hour=0)

    @property
    def is_day_aligned(self) -> bool:
        return self.start.hour == 0 and len(self.values) % 24 == 0

    def hours(self) -> np.ndarray:
        """Sample positions in hours since `origin`."""
        return self.start.hour + np.arange(len(self.values), dtype=float)

    def timestamps(self) -> list:
        return [self.start + timedelta(hours=i) for i in range(len(self.values))]


class CalendarIndex(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1, le=7, description="day of week, 1=Monday")
    n_d: Optional[int] = Field(default=None, ge=1, le=5, description="weekday index, None on weekends")
    t: float = Field(description="hour of day")

    @property
    def weekly_hour(self) -> float:
        return 24.0 * (self.k - 1) + self.t


class EventInfo(BaseModel):
    """Advance information about one scheduled event."""

    model_config = ConfigDict(frozen=True)

    commencement: datetime
    duration_hours: float = Field(gt=0.0)
    kind: str = "event"
    attendance: int = Field(ge=0)

    @field_validator("commencement")
    @classmethod
    def validate_commencement(cls, commencement: datetime) -> datetime:
        if commencement.tzinfo is None or commencement.utcoffset() is None:
            raise ValueError("Event commencement must carry a UTC offset.")
        return commencement

    @property
    def end(self) -> datetime:
        return self.commencement + timedelta(hours=self.duration_hours)

    @property
    def hour_of_day(self) -> float:
        c = self.commencement
        return c.hour + c.minute / 60.0 + c.second / 3600.0


class EventCalendar(BaseModel):
    model_config = ConfigDict(frozen=True)

    events: Tuple[EventInfo, ...] = ()

    @field_validator("events")
    @classmethod
    def validate_events(cls, events: Tuple[EventInfo, ...]) -> Tuple[EventInfo, ...]:
        ordered = tuple(sorted(events, key=lambda e: e.commencement))
        for previous, current in zip(ordered, ordered[1:]):
            if previous.end > current.commencement:
                raise ValueError(
                    f"Events overlap: {previous.commencement.isoformat()} runs past {current.commencement.isoformat()}."
                )
        return ordered

    def __len__(self) -> int:
        return len(self.events)

    def within(self, start: datetime, end: datetime) -> "EventCalendar":
        """Events whose commencement falls in [start, end)."""
        return EventCalendar(events=tuple(e for e in self.events if start <= e.commencement < end))


class DaySegment(BaseModel):
    """One midnight-to-midnight day of traffic and the events touching it."""

    model_config = ConfigDict(frozen=True)

    series: HourlyTrafficSeries
    events: Tuple[EventInfo, ...] = ()

    @field_validator("series")
    @classmethod
    def validate_series(cls, series: HourlyTrafficSeries) -> HourlyTrafficSeries:
        if not (series.start.hour == 0 and len(series) == 24):
            raise ValueError("A day segment is exactly 24 samples starting at local midnight.")
        return series

    @property
    def day(self) -> date:
        return self.series.start.date()

    @property
    def k(self) -> int:
        return self.series.start.isoweekday()


class DatasetSplit(BaseModel):
    model_config = ConfigDict(frozen=True)

    non_event_days: Tuple[DaySegment, ...] = ()
    event_days: Tuple[DaySegment, ...] = ()

    @property
    def day_count(self) -> int:
        return len(self.non_event_days) + len(self.event_days)
