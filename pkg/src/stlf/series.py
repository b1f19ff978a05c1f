"""Hourly load series: containers, ingestion, gap repair and shared transforms.

Timestamps are kept internally as integer hours since the Unix epoch (UTC),
which makes index arithmetic immune to DST quirks: index ``i`` of a series
maps to ``start_hour + i``. Missing observations are NaN until repaired.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np
from scipy.signal import lfilter

from stlf.errors import (
    DuplicateTimestampError,
    NonHourlySpacingError,
    ParseError,
    StationNotFoundError,
    UnrepairableBoundaryGapError,
    ZoneNotFoundError,
)

#: Fixed seasonal cycle lengths in hours. Never re-estimated per series.
DAY_HOURS = 24
WEEK_HOURS = 168
YEAR_HOURS = 8766  # stated constant; unused by the in-scope models

SECONDS_PER_HOUR = 3600

#: Default load floor (kWh) applied before fitting multiplicative models.
LOAD_FLOOR = 1e-3


@dataclass(frozen=True)
class SeasonalCycles:
    """The three fixed seasonal cycle lengths, in hours."""

    day: int = DAY_HOURS
    week: int = WEEK_HOURS
    year: int = YEAR_HOURS


@dataclass(frozen=True)
class CalendarFeatures:
    hour_of_day: int  # 0..23
    day_of_week: int  # 0..6, 0 = Monday


@dataclass(frozen=True)
class HourlySeries:
    """Equally spaced hourly observations.

    Attributes:
        start_hour: hours since the Unix epoch (UTC) of the first entry.
        values: load in kWh; NaN marks a missing observation.
        temp: optional aligned temperature channel (same length).
        meta: provenance notes (repaired indices, clamp counts, ...).

    ``values`` and ``temp`` are frozen after construction and safe to share
    read-only across workers.
    """

    start_hour: int
    values: np.ndarray
    temp: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.temp is not None:
            t = np.asarray(self.temp, dtype=np.float64)
            if t.shape != v.shape:
                raise ValueError(
                    f"temperature length {t.shape[0]} != load length {v.shape[0]}"
                )
            t.flags.writeable = False
            object.__setattr__(self, "temp", t)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def has_temp(self) -> bool:
        return self.temp is not None

    @property
    def is_complete(self) -> bool:
        if np.isnan(self.values).any():
            return False
        return not (self.temp is not None and np.isnan(self.temp).any())

    def timestamp(self, i: int) -> datetime:
        """UTC timestamp of index ``i``."""
        return datetime.fromtimestamp(
            (self.start_hour + i) * SECONDS_PER_HOUR, tz=timezone.utc
        )

    def index_of(self, ts: datetime) -> int:
        """Index corresponding to a whole-hour UTC timestamp (may be out of range)."""
        return hour_of_timestamp(ts) - self.start_hour


def hour_of_timestamp(ts: datetime) -> int:
    """Whole hours since the Unix epoch; raises if ``ts`` is not hour-aligned."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    seconds = ts.timestamp()
    hours = seconds / SECONDS_PER_HOUR
    if hours != int(hours):
        raise NonHourlySpacingError(f"timestamp {ts.isoformat()} is not on an hour boundary")
    return int(hours)


def calendar(ts: datetime) -> CalendarFeatures:
    """Calendar features of a timestamp: hour of day and day of week (Monday=0)."""
    return CalendarFeatures(hour_of_day=ts.hour, day_of_week=ts.weekday())


def exp_smooth(x, coeff: float) -> np.ndarray:
    """First-order exponential smoothing.

    ``out[0] = x[0]``; ``out[t] = (1-coeff)*x[t] + coeff*out[t-1]``. Used for
    the smoothed-temperature feature (coeff 0.85), which stands in for the
    thermal inertia of buildings.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("exp_smooth: empty input")
    if not 0.0 <= coeff < 1.0:
        raise ValueError(f"exp_smooth: coeff {coeff} outside [0, 1)")
    if np.isnan(x).any():
        raise ValueError("exp_smooth: input contains missing values")
    # y[t] = (1-c) x[t] + c y[t-1]; the initial condition makes y[0] == x[0].
    out, _ = lfilter([1.0 - coeff], [1.0, -coeff], x, zi=np.array([coeff * x[0]]))
    return out


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def _parse_timestamp(text: str, tz: ZoneInfo, row_num: int) -> int:
    raw = text.strip()
    try:
        ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ParseError(f"row {row_num}: bad timestamp {raw!r}: {exc}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=tz)
    ts = ts.astimezone(timezone.utc)
    if ts.minute or ts.second or ts.microsecond:
        raise NonHourlySpacingError(
            f"row {row_num}: timestamp {raw!r} is not on an hour boundary"
        )
    return int(ts.timestamp()) // SECONDS_PER_HOUR


def _parse_value(text: str, row_num: int, what: str) -> float:
    raw = text.strip()
    if raw == "":
        return math.nan
    try:
        return float(raw)
    except ValueError as exc:
        raise ParseError(f"row {row_num}: bad {what} {raw!r}") from exc


def load_long_csv(path, tz: str = "UTC") -> HourlySeries:
    """Read a long-format CSV: header ``timestamp,load[,temperature]``.

    Naive timestamps are interpreted in ``tz`` and converted to UTC. Rows may
    be out of order; gaps become NaN slots; duplicates are rejected.
    """
    path = Path(path)
    zone = ZoneInfo(tz)
    rows: list[tuple[int, float, float]] = []
    has_temp = False
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0].strip().lower() != "timestamp":
            raise ParseError(f"{path}: missing 'timestamp,load[,temperature]' header")
        has_temp = len(header) >= 3
        for row_num, row in enumerate(reader, start=2):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) < 2:
                raise ParseError(f"row {row_num}: expected at least 2 fields, got {len(row)}")
            hour = _parse_timestamp(row[0], zone, row_num)
            load = _parse_value(row[1], row_num, "load")
            temp = _parse_value(row[2], row_num, "temperature") if has_temp and len(row) > 2 else math.nan
            rows.append((hour, load, temp))
    if not rows:
        raise ParseError(f"{path}: no data rows")

    rows.sort(key=lambda r: r[0])
    for (h0, *_), (h1, *_) in zip(rows, rows[1:]):
        if h0 == h1:
            raise DuplicateTimestampError(
                f"duplicate timestamp {datetime.fromtimestamp(h1 * SECONDS_PER_HOUR, tz=timezone.utc).isoformat()}"
            )

    start = rows[0][0]
    n = rows[-1][0] - start + 1
    values = np.full(n, np.nan)
    temps = np.full(n, np.nan)
    for hour, load, temp in rows:
        values[hour - start] = load
        temps[hour - start] = temp
    return HourlySeries(
        start_hour=start,
        values=values,
        temp=temps if has_temp else None,
        meta={"source": str(path)},
    )


def write_long_csv(series: HourlySeries, path) -> None:
    """Inverse of :func:`load_long_csv` for complete series (round-trips exactly)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if series.has_temp:
            writer.writerow(["timestamp", "load", "temperature"])
        else:
            writer.writerow(["timestamp", "load"])
        for i in range(len(series)):
            ts = series.timestamp(i).strftime("%Y-%m-%dT%H:%M:%SZ")
            load = series.values[i]
            load_txt = "" if math.isnan(load) else repr(float(load))
            if series.has_temp:
                t = series.temp[i]
                writer.writerow([ts, load_txt, "" if math.isnan(t) else repr(float(t))])
            else:
                writer.writerow([ts, load_txt])


def _read_wide_rows(path: Path, key: str, key_col: str) -> dict[int, list[float]]:
    """Collect ``start_hour -> 24 hourly values`` for one id in a GEFCom wide file."""
    out: dict[int, list[float]] = {}
    found_key = False
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 28:
            raise ParseError(f"{path}: expected '{key_col},year,month,day,h1..h24' header")
        for row_num, row in enumerate(reader, start=2):
            if not row or all(c.strip() == "" for c in row):
                continue
            if row[0].strip() != key:
                continue
            found_key = True
            if len(row) < 28:
                raise ParseError(f"row {row_num}: expected 28 fields, got {len(row)}")
            try:
                year, month, day = int(row[1]), int(row[2]), int(row[3])
                day_start = datetime(year, month, day, tzinfo=timezone.utc)
            except ValueError as exc:
                raise ParseError(f"row {row_num}: bad date: {exc}") from exc
            hour0 = int(day_start.timestamp()) // SECONDS_PER_HOUR
            vals = []
            for h, cell in enumerate(row[4:28], start=1):
                cell = cell.strip().replace(",", "")  # tolerate thousands separators
                if cell == "" or cell.upper() == "NA":
                    vals.append(math.nan)
                else:
                    try:
                        vals.append(float(cell))
                    except ValueError as exc:
                        raise ParseError(f"row {row_num}: bad h{h} value {cell!r}") from exc
            if hour0 in out:
                raise DuplicateTimestampError(
                    f"{path}: duplicate day {year:04d}-{month:02d}-{day:02d} for {key_col} {key}"
                )
            out[hour0] = vals
    if not found_key:
        return {}
    return out


def load_gefcom_wide(load_path, temp_path, zone, station) -> HourlySeries:
    """Read the GEFCom2012 wide layout: one row per (id, year, month, day), h1..h24.

    The load series for ``zone`` is flattened to hourly and the ``station``
    temperature series is aligned to the same hour range (NaN where the
    station has no coverage).
    """
    load_path, temp_path = Path(load_path), Path(temp_path)
    load_days = _read_wide_rows(load_path, str(zone), "zone_id")
    if not load_days:
        raise ZoneNotFoundError(f"zone {zone} not found in {load_path}")
    temp_days = _read_wide_rows(temp_path, str(station), "station_id")
    if not temp_days:
        raise StationNotFoundError(f"station {station} not found in {temp_path}")

    start = min(load_days)
    end = max(load_days) + DAY_HOURS
    n = end - start
    values = np.full(n, np.nan)
    temps = np.full(n, np.nan)
    for hour0, vals in load_days.items():
        values[hour0 - start : hour0 - start + DAY_HOURS] = vals
    for hour0, vals in temp_days.items():
        lo = hour0 - start
        if lo + DAY_HOURS <= 0 or lo >= n:
            continue
        src_lo = max(0, -lo)
        src_hi = min(DAY_HOURS, n - lo)
        temps[lo + src_lo : lo + src_hi] = vals[src_lo:src_hi]
    return HourlySeries(
        start_hour=start,
        values=values,
        temp=temps,
        meta={"source": str(load_path), "zone": str(zone), "station": str(station)},
    )


# ---------------------------------------------------------------------------
# Repair
# ---------------------------------------------------------------------------


def _nan_runs(x: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [lo, hi) index ranges of consecutive NaNs."""
    isnan = np.isnan(x)
    runs = []
    i = 0
    n = x.shape[0]
    while i < n:
        if isnan[i]:
            j = i
            while j < n and isnan[j]:
                j += 1
            runs.append((i, j))
            i = j
        else:
            i += 1
    return runs


def _repair_channel(x: np.ndarray, max_gap: int, weekly_backfill: bool, label: str) -> tuple[np.ndarray, list[int]]:
    out = x.copy()
    n = out.shape[0]
    repaired: list[int] = []
    for lo, hi in _nan_runs(out):
        length = hi - lo
        repaired.extend(range(lo, hi))
        if lo == 0 or hi == n:
            # Boundary gap: no anchor on one side, so extend the nearest value.
            if weekly_backfill and length > max_gap:
                raise UnrepairableBoundaryGapError(
                    f"{label}: {length}-hour gap at series {'head' if lo == 0 else 'tail'} exceeds max_gap={max_gap}"
                )
            if lo == 0 and hi == n:
                raise UnrepairableBoundaryGapError(f"{label}: channel has no observed values")
            out[lo:hi] = out[hi] if lo == 0 else out[lo - 1]
        elif length <= max_gap or not weekly_backfill:
            left, right = out[lo - 1], out[hi]
            for k in range(length):
                out[lo + k] = left + (right - left) * (k + 1) / (length + 1)
        else:
            # Long interior gap: copy the same hour one week earlier to keep
            # the intraweek shape; earlier gaps are already repaired because
            # runs are processed left to right.
            left, right = out[lo - 1], out[hi]
            for idx in range(lo, hi):
                if idx - WEEK_HOURS >= 0:
                    out[idx] = out[idx - WEEK_HOURS]
                else:
                    k = idx - lo
                    out[idx] = left + (right - left) * (k + 1) / (length + 1)
    return out, repaired


def repair_gaps(series: HourlySeries, max_gap: int = 6) -> HourlySeries:
    """Fill missing entries so the series has no NaNs left.

    Load gaps of at most ``max_gap`` hours are linearly interpolated; longer
    interior gaps are back-filled from the same hour one week earlier.
    Boundary gaps longer than ``max_gap`` are unrepairable. Temperature gaps
    are always interpolated (weekly backfill has no physical meaning there).
    Already-complete series are returned unchanged.
    """
    if series.is_complete:
        return series
    values, repaired = _repair_channel(series.values, max_gap, True, "load")
    temp = series.temp
    temp_repaired: list[int] = []
    if temp is not None and np.isnan(temp).any():
        temp, temp_repaired = _repair_channel(temp, max_gap, False, "temperature")
    meta = dict(series.meta)
    meta["repaired_indices"] = repaired
    if temp_repaired:
        meta["repaired_temp_indices"] = temp_repaired
    return HourlySeries(series.start_hour, values, temp, meta)


def clamp_floor(series: HourlySeries, eps: float = LOAD_FLOOR) -> HourlySeries:
    """Clamp non-positive loads up to ``eps`` (multiplicative models divide by
    past values, so zeros are fatal). No-op when nothing is below the floor."""
    below = series.values < eps
    count = int(np.count_nonzero(below))
    if count == 0:
        return series
    values = series.values.copy()
    values[below] = eps
    meta = dict(series.meta)
    meta["clamped"] = count
    return HourlySeries(series.start_hour, values, series.temp, meta)
