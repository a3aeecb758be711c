import logging
from datetime import datetime, timedelta
from typing import List

from app.utils.exceptions import AlignmentError, FormatError, RangeError
from .schemas import (
    CalendarIndex,
    DatasetSplit,
    DaySegment,
    EventCalendar,
    EventInfo,
    HourlyTrafficSeries,
)

logger = logging.getLogger(__name__)


def hours_between(origin: datetime, moment: datetime) -> float:
    return (moment - origin).total_seconds() / 3600.0


def calendar_index(moment: datetime) -> CalendarIndex:
    k = moment.isoweekday()
    t = moment.hour + moment.minute / 60.0 + moment.second / 3600.0
    return CalendarIndex(k=k, n_d=k if k <= 5 else None, t=t)


def event_center_hour(event: EventInfo, origin: datetime, offset_hours: float = 0.0) -> float:
    """Position of `commencement + offset` on an hour axis anchored at `origin`."""
    return hours_between(origin, event.commencement) + offset_hours


def split_by_events(series: HourlyTrafficSeries, calendar: EventCalendar) -> DatasetSplit:
    """
    Divide historical traffic into non-event and event days.

    A day is an event day when an event runs during it: the event starts
    before the day ends and ends after the day starts. A game running past
    midnight marks both days; one ending exactly at midnight marks only its
    own day.

    **Errors**
    - FormatError: the series does not start at local midnight or has a partial day
    - RangeError: an event commences outside the series span
    """
    if not series.is_day_aligned:
        raise FormatError(
            f"series is not day-aligned (start={series.start.isoformat()}, samples={len(series)})"
        )

    for event in calendar.events:
        if not (series.start <= event.commencement < series.end):
            raise RangeError(
                f"event at {event.commencement.isoformat()} lies outside "
                f"[{series.start.isoformat()}, {series.end.isoformat()})"
            )

    values = series.values
    non_event: List[DaySegment] = []
    event_days: List[DaySegment] = []

    for day in range(len(series) // 24):
        day_start = series.start + timedelta(days=day)
        day_end = day_start + timedelta(days=1)
        touching = tuple(
            e for e in calendar.events if e.commencement < day_end and e.end > day_start
        )
        segment = DaySegment(
            series=HourlyTrafficSeries(start=day_start, values=values[24 * day : 24 * (day + 1)]),
            events=touching,
        )
        (event_days if touching else non_event).append(segment)

    logger.info(f"split_done non_event_days={len(non_event)} event_days={len(event_days)}")
    return DatasetSplit(non_event_days=tuple(non_event), event_days=tuple(event_days))


def extract_residual(total: HourlyTrafficSeries, daily_prediction: HourlyTrafficSeries) -> HourlyTrafficSeries:
    """Nonroutine part of the traffic: observed total minus the daily model. Negative values are kept."""
    if total.start != daily_prediction.start or len(total) != len(daily_prediction):
        raise AlignmentError(
            f"cannot subtract series starting {daily_prediction.start.isoformat()} ({len(daily_prediction)} h) "
            f"from series starting {total.start.isoformat()} ({len(total)} h)"
        )
    return HourlyTrafficSeries.from_array(total.start, total.array - daily_prediction.array)


def slice_series(series: HourlyTrafficSeries, start: datetime, end: datetime) -> HourlyTrafficSeries:
    """Samples whose hour lies in [start, end)."""
    first = hours_between(series.start, start)
    last = hours_between(series.start, end)
    if first != int(first) or last != int(last):
        raise AlignmentError("slice bounds must be whole hours from the series start")
    first, last = int(first), int(last)
    if first < 0 or last > len(series) or first >= last:
        raise RangeError(
            f"slice [{start.isoformat()}, {end.isoformat()}) is not inside "
            f"[{series.start.isoformat()}, {series.end.isoformat()})"
        )
    return HourlyTrafficSeries(start=start.astimezone(series.start.tzinfo), values=series.values[first:last])


def trim_to_whole_days(series: HourlyTrafficSeries) -> HourlyTrafficSeries:
    if series.is_day_aligned:
        return series

    lead = (24 - series.start.hour) % 24
    whole = (len(series) - lead) // 24
    if whole < 1:
        raise FormatError("series does not contain a single whole day")

    start = series.start + timedelta(hours=lead)
    values = series.values[lead : lead + 24 * whole]
    logger.warning(f"series_trimmed leading_hours={lead} trailing_hours={len(series) - lead - len(values)}")
    return HourlyTrafficSeries(start=start, values=values)

