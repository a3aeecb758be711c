import logging
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.daily.schemas import ComponentLabel, GaussianComponent, WeeklyFitDiagnostics, WeeklyProfileModel
from app.daily.services import eval_weekly_series
from app.predictor.schemas import Forecast
from app.pulse.schemas import EventPulse
from app.pulse.services import pulse_on_axis, pulse_values
from app.regression.schemas import AttendanceRegression, SigmaPrior
from app.regression.services import estimate_initial_pulse
from app.timeseries.schemas import EventCalendar, EventInfo, HourlyTrafficSeries
from app.utils.exceptions import ArgumentError, EmptySelectionError, FormatError, VersionError
from .schemas import (
    INTERVAL_MS,
    MODEL_FORMAT,
    MODEL_VERSION,
    TSV_COLUMNS,
    EventFitRecord,
    GridTrafficRecord,
    ModelDocument,
    SyntheticEvent,
    SyntheticSpec,
    TrafficKind,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

HOUR_MS = 3_600_000
TRAFFIC_COLUMNS = tuple(kind.value for kind in TrafficKind)
SERIES_COLUMNS = ("timestamp", "value")
CALENDAR_COLUMNS = ("commencement", "duration_hours", "kind", "attendance")
FORECAST_COLUMNS = ("hour", "observed", "predicted", "daily", "pulse")
FLOAT_FORMAT = "%.17g"


# ---------------------------------------------------------------------------
# grid records
# ---------------------------------------------------------------------------


def _numbered_lines(source) -> Iterator[Tuple[int, str]]:
    if hasattr(source, "read"):
        yield from enumerate(source, start=1)
        return
    with open(source, encoding="utf-8") as handle:
        yield from enumerate(handle, start=1)


def _tokenize(source) -> pd.DataFrame:
    rows: List[Tuple] = []
    for lineno, raw in _numbered_lines(source):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != len(TSV_COLUMNS):
            raise FormatError(f"expected {len(TSV_COLUMNS)} tab-separated fields, got {len(fields)}", line=lineno)
        rows.append((lineno, *(f.strip() for f in fields)))
    return pd.DataFrame(rows, columns=("line",) + TSV_COLUMNS)


def _numeric(frame: pd.DataFrame, column: str, required: bool, integer: bool) -> pd.Series:
    raw = frame[column]
    values = pd.to_numeric(raw, errors="coerce")
    bad = values.isna() & (raw != "") | (values < 0)
    if required:
        bad |= raw == ""
    if integer:
        bad |= values.notna() & (values % 1 != 0)
    if bad.any():
        first = bad.idxmax()
        raise FormatError(f"invalid {column} value {raw[first]!r}", line=int(frame.at[first, "line"]))
    return values


def _grid_record(line: int, **fields) -> GridTrafficRecord:
    try:
        return GridTrafficRecord(**fields)
    except ValidationError as exc:
        raise FormatError(f"invalid grid record: {exc.errors()[0]['msg']}", line=line) from exc


def ingest_tsv(
    source,
    traffic_kind: Union[TrafficKind, str],
    grid_ids: Iterable[int],
    tz_offset_hours: float = 1.0,
) -> HourlyTrafficSeries:
    """
    Hourly traffic of the selected grid squares from ten-minute grid records.

    **Input**
    - source: path or open text stream of tab-separated records
      `(square_id, epoch_ms, country_code, sms_in, sms_out, call_in, call_out, internet)`
    - traffic_kind: which activity column to sum
    - grid_ids: squares to keep
    - tz_offset_hours: UTC offset applied before hour/day bucketing

    **Returns**
    - gap-free hourly series; hours without records inside the covered span are 0

    **Errors**
    - FormatError: a line does not parse (the message carries its line number)
    - EmptySelectionError: no record of the selected squares
    """
    kind = TrafficKind(traffic_kind)
    wanted = {int(g) for g in grid_ids}
    tz_ms = int(round(tz_offset_hours * HOUR_MS))
    if tz_ms % INTERVAL_MS:
        raise ArgumentError(f"timezone offset must be a multiple of ten minutes (got {tz_offset_hours} h)")

    frame = _tokenize(source)
    if frame.empty:
        raise EmptySelectionError("no records in input")

    square = _numeric(frame, "square_id", required=True, integer=True)
    epoch = _numeric(frame, "epoch_ms", required=True, integer=True)
    traffic = pd.DataFrame({column: _numeric(frame, column, required=False, integer=False) for column in TRAFFIC_COLUMNS})

    empty = traffic.isna().all(axis=1)
    if empty.any():
        logger.warning(f"ingest_records_skipped count={int(empty.sum())} reason=no_traffic_fields")
    selected = frame.index[~empty & square.isin(wanted)]
    if selected.empty:
        raise EmptySelectionError(f"no records for grid ids {sorted(wanted)}")

    parsed = [
        _grid_record(
            int(frame.at[i, "line"]),
            square_id=int(square[i]),
            epoch_ms=int(epoch[i]),
            **{column: float(value) for column, value in traffic.loc[i].items() if pd.notna(value)},
        )
        for i in selected
    ]
    records = pd.DataFrame(
        {
            "square_id": [rec.square_id for rec in parsed],
            "epoch_ms": [rec.epoch_ms for rec in parsed],
            "country_code": frame.loc[selected, "country_code"].to_list(),
            "value": [rec.value(kind) for rec in parsed],
        }
    )
    records = records.assign(bucket=(records["epoch_ms"] + tz_ms) // HOUR_MS)
    # fixed row order makes float sums independent of input order
    records = records.sort_values(["bucket", "square_id", "epoch_ms", "country_code", "value"], kind="mergesort")
    hourly = records.groupby("bucket", sort=True)["value"].sum()

    first, last = int(hourly.index.min()), int(hourly.index.max())
    hourly = hourly.reindex(range(first, last + 1))
    missing = int(hourly.isna().sum())
    if missing:
        logger.warning(f"ingest_hours_zero_filled count={missing} span_hours={len(hourly)}")
    hourly = hourly.fillna(0.0)

    zone = timezone(timedelta(milliseconds=tz_ms))
    start = datetime.fromtimestamp((first * HOUR_MS - tz_ms) / 1000.0, tz=zone)
    logger.info(
        f"ingest_done kind={kind.value} grids={len(wanted)} records={len(records)} "
        f"hours={len(hourly)} start={start.isoformat()}"
    )
    return HourlyTrafficSeries.from_array(start, hourly.to_numpy(dtype=float))


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------


def generate_synthetic(spec: SyntheticSpec) -> Tuple[HourlyTrafficSeries, EventCalendar, ModelDocument]:
    """
    Sample the weekly profile plus every event pulse at integer hours, add
    seeded Gaussian noise (sd = `noise_fraction` x largest component peak)
    and clamp at zero.

    The same spec always yields bit-identical output.
    """
    daily = eval_weekly_series(spec.weekly, spec.start, spec.length)
    hours = daily.hours()
    values = daily.array.copy()

    records: List[EventFitRecord] = []
    for event in spec.events:
        pulse = event.pulse
        if pulse is None:
            pulse = estimate_initial_pulse(event.info, spec.regression, spec.sigma_prior, spec.kickoff_offset_hours)
        values += pulse_values(pulse_on_axis(pulse, event.info, daily.origin), hours)
        records.append(EventFitRecord(info=event.info, pulse=pulse))

    if spec.noise_fraction > 0:
        rng = np.random.default_rng(spec.seed)
        values = values + rng.normal(0.0, spec.noise_fraction * spec.weekly.max_peak, values.size)
    values = np.clip(values, 0.0, None)

    truth = ModelDocument(
        weekly=spec.weekly,
        events=tuple(records),
        regression=spec.regression,
        sigma_prior=spec.sigma_prior,
        kickoff_offset_hours=spec.kickoff_offset_hours,
    )
    logger.info(
        f"synthetic_done weeks={spec.weeks} events={len(records)} noise_fraction={spec.noise_fraction} seed={spec.seed}"
    )
    return HourlyTrafficSeries.from_array(spec.start, values), truth.calendar, truth


CET = timezone(timedelta(hours=1))

# (peak, centre, width) per component
DEFAULT_WEEKLY = {
    ComponentLabel.MW: (95.0, 9.0, 3.2),
    ComponentLabel.AW: (105.0, 14.5, 3.4),
    ComponentLabel.EW: (100.0, 20.0, 3.0),
    ComponentLabel.MSA: (90.0, 10.5, 3.3),
    ComponentLabel.ASA: (100.0, 15.5, 3.5),
    ComponentLabel.ESA: (110.0, 20.5, 3.2),
    ComponentLabel.MSU: (85.0, 11.0, 3.6),
    ComponentLabel.ASU: (95.0, 16.0, 3.4),
    ComponentLabel.ESU: (105.0, 20.5, 3.1),
}

# commencement, kind, attendance, (volume, centre, width)
DEFAULT_EVENTS = (
    (datetime(2013, 12, 4, 22, 0, tzinfo=CET), "coppa_italia", 18316, (349.8, 21.0, 1.176)),
    (datetime(2013, 12, 8, 21, 45, tzinfo=CET), "serie_a", 30952, (769.7, 20.75, 1.011)),
    (datetime(2013, 12, 11, 21, 45, tzinfo=CET), "champions_league", 69776, (2059.8, 20.75, 1.155)),
    (datetime(2013, 12, 14, 16, 0, tzinfo=CET), "serie_a", 32761, (829.8, 15.0, 1.263)),
    (datetime(2013, 12, 18, 20, 45, tzinfo=CET), "coppa_italia", 40000, (1300.0, 19.75, 1.4)),
    (datetime(2013, 12, 22, 15, 0, tzinfo=CET), "serie_a", 25000, (450.0, 14.0, 0.95)),
)
DEFAULT_START = datetime(2013, 12, 2, tzinfo=CET)
DEFAULT_EVENT_HOURS = 2.25


def default_synthetic_spec(weeks: int = 3, noise_fraction: float = 0.05, seed: int = 0) -> SyntheticSpec:
    """
    Monday-anchored December corpus: four events in the first two weeks,
    two in the third whose volumes stray from the attendance trend.
    """
    weekly = WeeklyProfileModel(
        components=tuple(
            GaussianComponent(label=label, peak=peak, center=center, sigma=sigma)
            for label, (peak, center, sigma) in DEFAULT_WEEKLY.items()
        )
    )
    end = DEFAULT_START + timedelta(weeks=weeks)
    events = tuple(
        SyntheticEvent(
            info=EventInfo(commencement=when, duration_hours=DEFAULT_EVENT_HOURS, kind=kind, attendance=attendance),
            pulse=EventPulse(amplitude=volume, center=center, sigma=sigma),
        )
        for when, kind, attendance, (volume, center, sigma) in DEFAULT_EVENTS
        if when < end
    )
    return SyntheticSpec(
        weekly=weekly,
        events=events,
        noise_fraction=noise_fraction,
        seed=seed,
        weeks=weeks,
        start=DEFAULT_START,
    )


# ---------------------------------------------------------------------------
# model document
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, datetime):
        return value.isoformat()
    text = str(value)
    if "\n" in text or "\r" in text:
        raise ArgumentError(f"value {text!r} cannot span lines")
    return text


def _document_entries(doc: ModelDocument) -> List[Tuple[str, object]]:
    entries: List[Tuple[str, object]] = [
        ("format", MODEL_FORMAT),
        ("version", doc.version),
        ("kickoff_offset_hours", float(doc.kickoff_offset_hours)),
    ]
    for c in doc.weekly.components:
        entries += [
            (f"weekly.{c.label.value}.R", c.peak),
            (f"weekly.{c.label.value}.t", c.center),
            (f"weekly.{c.label.value}.sigma", c.sigma),
        ]
    if doc.weekly_fit is not None:
        fit = doc.weekly_fit
        entries += [
            ("weekly_fit.objective", float(fit.objective)),
            ("weekly_fit.converged", fit.converged),
            ("weekly_fit.iterations", fit.iterations),
            ("weekly_fit.n_samples", fit.n_samples),
        ]
        if fit.restart is not None:
            entries.append(("weekly_fit.restart", fit.restart))
    if doc.regression is not None:
        reg = doc.regression
        entries += [
            ("regression.slope", reg.slope),
            ("regression.intercept", reg.intercept),
            ("regression.pearson_r", reg.pearson_r),
            ("regression.n_samples", reg.n_samples),
        ]
    if doc.sigma_prior is not None:
        entries += [
            ("sigma_prior.mean_sigma", doc.sigma_prior.mean_sigma),
            ("sigma_prior.n_samples", doc.sigma_prior.n_samples),
        ]
    entries.append(("events.count", len(doc.events)))
    for i, record in enumerate(doc.events):
        prefix = f"event.{i}"
        entries += [
            (f"{prefix}.commencement", record.info.commencement),
            (f"{prefix}.duration_hours", float(record.info.duration_hours)),
            (f"{prefix}.kind", record.info.kind),
            (f"{prefix}.attendance", record.info.attendance),
            (f"{prefix}.R", record.pulse.amplitude),
            (f"{prefix}.t", record.pulse.center),
            (f"{prefix}.sigma", record.pulse.sigma),
        ]
        for name in ("sse", "converged", "r2"):
            value = getattr(record, name)
            if value is not None:
                entries.append((f"{prefix}.{name}", float(value) if name != "converged" else value))
    return entries


def save_model(doc: ModelDocument, path: PathLike) -> Path:
    """Write `doc` as `key = value` lines closed by an `end = <entries>` marker."""
    entries = _document_entries(doc)
    lines = [f"{key} = {_fmt(value)}" for key, value in entries]
    lines.append(f"end = {len(entries)}")
    target = Path(path)
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"model_saved path={target} entries={len(entries)} events={len(doc.events)}")
    return target


class _Entries:
    """Parsed document entries that remember their line numbers."""

    def __init__(self, values: Dict[str, str], lines: Dict[str, int]):
        self.values = values
        self.lines = lines
        self.used = set()

    def has(self, key: str) -> bool:
        return key in self.values

    def has_prefix(self, prefix: str) -> bool:
        return any(key.startswith(prefix) for key in self.values)

    def text(self, key: str) -> str:
        if key not in self.values:
            raise FormatError(f"missing key {key!r}")
        self.used.add(key)
        return self.values[key]

    def number(self, key: str) -> float:
        raw = self.text(key)
        try:
            return float(raw)
        except ValueError:
            raise FormatError(f"{key} is not a number: {raw!r}", line=self.lines[key]) from None

    def integer(self, key: str) -> int:
        raw = self.text(key)
        try:
            return int(raw)
        except ValueError:
            raise FormatError(f"{key} is not an integer: {raw!r}", line=self.lines[key]) from None

    def flag(self, key: str) -> bool:
        raw = self.text(key)
        if raw not in ("true", "false"):
            raise FormatError(f"{key} must be true or false (got {raw!r})", line=self.lines[key])
        return raw == "true"

    def moment(self, key: str) -> datetime:
        raw = self.text(key)
        try:
            return datetime.fromisoformat(raw)
        except ValueError:
            raise FormatError(f"{key} is not an ISO timestamp: {raw!r}", line=self.lines[key]) from None

    def optional(self, key: str, read):
        return read(key) if self.has(key) else None


def _parse_entries(text: str) -> _Entries:
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    end_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if end_seen:
            raise FormatError("content after end marker", line=lineno)
        if "=" not in line:
            raise FormatError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "end":
            try:
                declared = int(value)
            except ValueError:
                raise FormatError(f"end marker is not an integer: {value!r}", line=lineno) from None
            if declared != len(values):
                raise FormatError(f"end marker declares {declared} entries, found {len(values)}", line=lineno)
            end_seen = True
            continue
        if key in values:
            raise FormatError(f"duplicate key {key!r}", line=lineno)
        values[key] = value
        lines[key] = lineno
    if not end_seen:
        raise FormatError("missing end marker (document truncated?)")
    return _Entries(values, lines)


def _read_document(entries: _Entries) -> ModelDocument:
    if entries.text("format") != MODEL_FORMAT:
        raise FormatError(f"not a model document (format={entries.values['format']!r})", line=entries.lines["format"])
    version = entries.integer("version")
    if version != MODEL_VERSION:
        raise VersionError(f"unsupported model version {version} (expected {MODEL_VERSION})", line=entries.lines["version"])

    weekly = WeeklyProfileModel(
        components=tuple(
            GaussianComponent(
                label=label,
                peak=entries.number(f"weekly.{label.value}.R"),
                center=entries.number(f"weekly.{label.value}.t"),
                sigma=entries.number(f"weekly.{label.value}.sigma"),
            )
            for label in ComponentLabel
        )
    )

    weekly_fit = None
    if entries.has_prefix("weekly_fit."):
        weekly_fit = WeeklyFitDiagnostics(
            objective=entries.number("weekly_fit.objective"),
            converged=entries.flag("weekly_fit.converged"),
            iterations=entries.integer("weekly_fit.iterations"),
            n_samples=entries.integer("weekly_fit.n_samples"),
            restart=entries.optional("weekly_fit.restart", entries.integer),
        )

    regression = None
    if entries.has_prefix("regression."):
        regression = AttendanceRegression(
            slope=entries.number("regression.slope"),
            intercept=entries.number("regression.intercept"),
            pearson_r=entries.number("regression.pearson_r"),
            n_samples=entries.integer("regression.n_samples"),
        )

    sigma_prior = None
    if entries.has_prefix("sigma_prior."):
        sigma_prior = SigmaPrior(
            mean_sigma=entries.number("sigma_prior.mean_sigma"),
            n_samples=entries.integer("sigma_prior.n_samples"),
        )

    events: List[EventFitRecord] = []
    for i in range(entries.integer("events.count")):
        prefix = f"event.{i}"
        events.append(
            EventFitRecord(
                info=EventInfo(
                    commencement=entries.moment(f"{prefix}.commencement"),
                    duration_hours=entries.number(f"{prefix}.duration_hours"),
                    kind=entries.text(f"{prefix}.kind"),
                    attendance=entries.integer(f"{prefix}.attendance"),
                ),
                pulse=EventPulse(
                    amplitude=entries.number(f"{prefix}.R"),
                    center=entries.number(f"{prefix}.t"),
                    sigma=entries.number(f"{prefix}.sigma"),
                ),
                sse=entries.optional(f"{prefix}.sse", entries.number),
                converged=entries.optional(f"{prefix}.converged", entries.flag),
                r2=entries.optional(f"{prefix}.r2", entries.number),
            )
        )

    unknown = sorted(set(entries.values) - entries.used - {"kickoff_offset_hours"})
    if unknown:
        raise FormatError(f"unknown key {unknown[0]!r}", line=entries.lines[unknown[0]])

    return ModelDocument(
        version=version,
        weekly=weekly,
        weekly_fit=weekly_fit,
        events=tuple(events),
        regression=regression,
        sigma_prior=sigma_prior,
        kickoff_offset_hours=entries.number("kickoff_offset_hours"),
    )


def load_model(path: PathLike) -> ModelDocument:
    """
    Read a document written by `save_model`.

    **Errors**
    - VersionError: the document declares another format version
    - FormatError: anything else that does not parse or validate
    """
    entries = _parse_entries(Path(path).read_text(encoding="utf-8"))
    try:
        doc = _read_document(entries)
    except ValidationError as exc:
        raise FormatError(f"invalid model document: {exc.errors()[0]['msg']}") from exc
    logger.info(f"model_loaded path={path} events={len(doc.events)} regression={doc.regression is not None}")
    return doc


# ---------------------------------------------------------------------------
# csv files
# ---------------------------------------------------------------------------


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    target = Path(path)
    frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="")
    return target


def _read_frame(path: PathLike, columns: Tuple[str, ...]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise FormatError(f"unreadable csv {path}: {exc}") from exc
    if tuple(frame.columns) != columns:
        raise FormatError(f"expected header {','.join(columns)}, got {','.join(map(str, frame.columns))}", line=1)
    return frame


def write_series_csv(series: HourlyTrafficSeries, path: PathLike) -> Path:
    frame = pd.DataFrame({"timestamp": [t.isoformat() for t in series.timestamps()], "value": series.array})
    return _write_frame(frame, path)


def read_series_csv(path: PathLike) -> HourlyTrafficSeries:
    """Read a `timestamp,value` file; timestamps must advance one hour per row."""
    frame = _read_frame(path, SERIES_COLUMNS)
    if frame.empty:
        raise FormatError(f"series file {path} has no rows")

    previous: Optional[datetime] = None
    values: List[float] = []
    for index, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            moment = datetime.fromisoformat(row.timestamp)
            value = float(row.value)
        except ValueError:
            raise FormatError(f"cannot parse row {row.timestamp!r},{row.value!r}", line=index) from None
        if previous is not None and moment - previous != timedelta(hours=1):
            raise FormatError(f"timestamp {row.timestamp} does not follow {previous.isoformat()} by one hour", line=index)
        if previous is None:
            start = moment
        previous = moment
        values.append(value)

    try:
        return HourlyTrafficSeries.from_array(start, values)
    except ValidationError as exc:
        raise FormatError(f"invalid series in {path}: {exc.errors()[0]['msg']}") from exc


def write_calendar_csv(calendar: EventCalendar, path: PathLike) -> Path:
    frame = pd.DataFrame(
        [(e.commencement.isoformat(), float(e.duration_hours), e.kind, e.attendance) for e in calendar.events],
        columns=list(CALENDAR_COLUMNS),
    )
    return _write_frame(frame, path)


def read_calendar_csv(path: PathLike) -> EventCalendar:
    frame = _read_frame(path, CALENDAR_COLUMNS)
    events: List[EventInfo] = []
    for index, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            events.append(
                EventInfo(
                    commencement=datetime.fromisoformat(row.commencement),
                    duration_hours=float(row.duration_hours),
                    kind=row.kind or "event",
                    attendance=int(row.attendance),
                )
            )
        except (ValueError, ValidationError) as exc:
            raise FormatError(f"invalid event row: {exc}", line=index) from None
    try:
        return EventCalendar(events=tuple(events))
    except ValidationError as exc:
        raise FormatError(f"invalid calendar {path}: {exc.errors()[0]['msg']}") from exc


def export_forecast_csv(forecast: Forecast, path: PathLike) -> Path:
    """Plot-ready `hour,observed,predicted,daily,pulse` rows; `observed` is empty when not known."""
    observed = forecast.observed.array if forecast.observed is not None else np.full(len(forecast.predicted), np.nan)
    frame = pd.DataFrame(
        {
            "hour": [t.isoformat() for t in forecast.predicted.timestamps()],
            "observed": observed,
            "predicted": forecast.predicted.array,
            "daily": forecast.daily.array,
            "pulse": forecast.pulse.array,
        },
        columns=list(FORECAST_COLUMNS),
    )
    target = _write_frame(frame, path)
    logger.info(f"forecast_exported path={target} rows={len(frame)}")
    return target
