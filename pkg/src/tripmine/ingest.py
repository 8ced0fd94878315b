"""Trip record parsing, the three cleaning steps, and frequent-user selection."""
from __future__ import annotations

import io
import math
from collections import Counter
from dataclasses import asdict, dataclass, replace
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, List, Sequence, Set, Tuple

from .errors import EmptyInputError
from .geo import GeoPoint, Region, gcj02_to_wgs84, in_region

COLUMNS = ("R_id", "P_id", "D_id", "O_LNG", "O_LAT", "D_LNG", "D_LAT", "O_Time", "D_Time", "L")
TIME_FORMAT = "%Y-%m-%d %H:%M:%S"


@dataclass(frozen=True)
class TripRecord:
    r_id: str
    p_id: str
    d_id: str
    origin: GeoPoint
    dest: GeoPoint
    o_time: int
    d_time: int
    distance_km: float

    @property
    def duration_s(self) -> int:
        return self.d_time - self.o_time

    @property
    def speed_kmh(self) -> float:
        return self.distance_km * 3600.0 / self.duration_s


@dataclass
class CleaningReport:
    total_read: int = 0
    rejected_parse: int = 0
    rejected_region: int = 0
    rejected_speed: int = 0
    rejected_time_order: int = 0
    retained: int = 0

    def merge(self, other: "CleaningReport") -> "CleaningReport":
        return CleaningReport(**{k: getattr(self, k) + getattr(other, k) for k in asdict(self)})

    def reconciles(self) -> bool:
        return (self.retained + self.rejected_parse + self.rejected_region
                + self.rejected_speed + self.rejected_time_order) == self.total_read

    def to_json(self):
        return asdict(self)


@dataclass(frozen=True)
class SchemaConfig:
    delimiter: str = ","
    has_header: bool = True
    tz_offset_hours: float = 8.0

    @property
    def tz(self) -> timezone:
        return timezone(timedelta(hours=self.tz_offset_hours))


def _parse_time(text: str, tz: timezone) -> int:
    text = text.strip()
    try:
        v = float(text)
    except ValueError:
        return int(datetime.strptime(text, TIME_FORMAT).replace(tzinfo=tz).timestamp())
    if not math.isfinite(v) or v != int(v):
        raise ValueError(f"non-integral epoch {text!r}")
    return int(v)


def _finite(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(text)
    return v


def parse_line(fields: Sequence[str], tz: timezone) -> TripRecord:
    """Build a record from the ten trip-table columns; raises ValueError if invalid."""
    if len(fields) != len(COLUMNS):
        raise ValueError(f"expected {len(COLUMNS)} fields, got {len(fields)}")
    r_id, p_id, d_id = (f.strip() for f in fields[:3])
    if not r_id or not p_id:
        raise ValueError("empty id")
    o = GeoPoint(_finite(fields[3]), _finite(fields[4]))
    d = GeoPoint(_finite(fields[5]), _finite(fields[6]))
    o_time = _parse_time(fields[7], tz)
    d_time = _parse_time(fields[8], tz)
    dist = _finite(fields[9])
    if dist <= 0:
        raise ValueError("non-positive distance")
    if d_time <= o_time:
        raise ValueError("arrival not after departure")
    return TripRecord(r_id, p_id, d_id, o, d, o_time, d_time, dist)


def parse_records(stream, schema: SchemaConfig = SchemaConfig()) -> Tuple[List[TripRecord], CleaningReport]:
    """Parse delimited text (bytes or str stream) into records.

    Malformed lines are counted in ``rejected_parse`` and skipped.  Blank lines
    are ignored entirely.
    """
    if isinstance(stream, (bytes, str)):
        stream = io.BytesIO(stream.encode() if isinstance(stream, str) else stream)
    report = CleaningReport()
    records: List[TripRecord] = []
    tz = schema.tz
    first = True
    for raw in stream:
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.rstrip("\r\n")
        if first and schema.has_header:
            first = False
            continue
        first = False
        if not line.strip():
            continue
        report.total_read += 1
        try:
            records.append(parse_line(line.split(schema.delimiter), tz))
        except ValueError:
            report.rejected_parse += 1
    if not records:
        raise EmptyInputError("no parseable trip records")
    report.retained = len(records)
    return records, report


def read_records(path, schema: SchemaConfig = SchemaConfig()):
    with open(path, "rb") as fh:
        return parse_records(fh, schema)


def _fmt_float(x: float) -> str:
    return repr(float(x))


def format_time(ts: int, tz: timezone) -> str:
    return datetime.fromtimestamp(ts, tz).strftime(TIME_FORMAT)


def format_record(t: TripRecord, schema: SchemaConfig = SchemaConfig()) -> str:
    tz = schema.tz
    return schema.delimiter.join([
        t.r_id, t.p_id, t.d_id,
        _fmt_float(t.origin.lng), _fmt_float(t.origin.lat),
        _fmt_float(t.dest.lng), _fmt_float(t.dest.lat),
        format_time(t.o_time, tz), format_time(t.d_time, tz),
        _fmt_float(t.distance_km),
    ])


def emit_table(records: Iterable[TripRecord], schema: SchemaConfig = SchemaConfig()) -> bytes:
    """Serialize records as delimited trip-table UTF-8 text."""
    lines = [schema.delimiter.join(COLUMNS)] if schema.has_header else []
    lines.extend(format_record(t, schema) for t in records)
    return ("\n".join(lines) + "\n").encode("utf-8")


def clean(records: Sequence[TripRecord], region: Region, speed_cap_kmh: float = 120.0,
          convert_datum: bool = False) -> Tuple[List[TripRecord], CleaningReport]:
    """Apply datum conversion, region filtering, and the speed cap, preserving order."""
    if speed_cap_kmh <= 0:
        raise ValueError("speed cap must be positive")
    report = CleaningReport(total_read=len(records))
    kept = []
    for t in records:
        if t.d_time <= t.o_time:
            report.rejected_time_order += 1
            continue
        if convert_datum:
            t = replace(t, origin=gcj02_to_wgs84(t.origin), dest=gcj02_to_wgs84(t.dest))
        if not (in_region(t.origin, region) and in_region(t.dest, region)):
            report.rejected_region += 1
            continue
        if t.speed_kmh > speed_cap_kmh:
            report.rejected_speed += 1
            continue
        kept.append(t)
    report.retained = len(kept)
    return kept, report


def month_key(ts: int, tz: timezone) -> Tuple[int, int]:
    d = datetime.fromtimestamp(ts, tz)
    return d.year, d.month


def months_between(start: date, end: date) -> List[Tuple[int, int]]:
    out = []
    y, m = start.year, start.month
    while (y, m) <= (end.year, end.month):
        out.append((y, m))
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return out


def select_frequent_users(records: Iterable[TripRecord], min_trips_per_month: int,
                          months: Sequence[Tuple[int, int]], tz: timezone = SchemaConfig().tz,
                          mode: str = "strict") -> Set[str]:
    """Users with more than ``min_trips_per_month`` trips per calendar month.

    ``mode="strict"`` requires the count to exceed the threshold in every
    listed month; ``mode="average"`` compares the mean over the months.
    """
    if not months:
        raise ValueError("months must be non-empty")
    wanted = set(months)
    counts: Counter = Counter()
    users = set()
    for t in records:
        key = month_key(t.o_time, tz)
        users.add(t.p_id)
        if key in wanted:
            counts[t.p_id, key] += 1
    if mode == "strict":
        return {u for u in users if all(counts[u, m] > min_trips_per_month for m in wanted)}
    if mode == "average":
        return {u for u in users if sum(counts[u, m] for m in wanted) / len(wanted) > min_trips_per_month}
    raise ValueError(f"unknown frequency mode {mode!r}")
