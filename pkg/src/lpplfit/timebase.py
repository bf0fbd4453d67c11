"""Decimal-year time base and price-series ingestion.

All fitting in this package operates on decimal years: ``year + elapsed
fraction of that calendar year``, leap-aware and anchored at Jan 1 00:00 UTC.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

__all__ = [
    "TimebaseError",
    "RangeError",
    "EmptyInputError",
    "DomainError",
    "DuplicateTimeError",
    "DateFormatError",
    "PriceSeries",
    "to_decimal_year",
    "from_decimal_year",
    "ingest_csv",
    "write_series_csv",
    "read_series_csv",
    "bundled_path",
    "MIN_FIT_POINTS",
]

MIN_YEAR = 1800
MAX_YEAR = 2200
MIN_FIT_POINTS = 8

_ISO = re.compile(r"^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2})?)?$")
_DOTTED = re.compile(r"^\d{1,2}\.\d{1,2}\.\d{4}$")


class TimebaseError(ValueError):
    """Base class for ingestion and conversion errors."""


class RangeError(TimebaseError):
    pass


class EmptyInputError(TimebaseError):
    pass


class DomainError(TimebaseError):
    pass


class DuplicateTimeError(TimebaseError):
    pass


class DateFormatError(TimebaseError):
    pass


def _as_utc(instant: datetime | date) -> datetime:
    if not isinstance(instant, datetime):
        instant = datetime(instant.year, instant.month, instant.day)
    if instant.tzinfo is None:
        return instant.replace(tzinfo=timezone.utc)
    return instant.astimezone(timezone.utc)


def _year_start(year: int) -> datetime:
    return datetime(year, 1, 1, tzinfo=timezone.utc)


def to_decimal_year(instant: datetime | date) -> float:
    """Convert a UTC instant to a decimal year.

    Naive datetimes and plain dates are taken as UTC.

    >>> to_decimal_year(datetime(2015, 7, 2, 12))
    2015.5
    """
    instant = _as_utc(instant)
    year = instant.year
    if not MIN_YEAR <= year < MAX_YEAR:
        raise RangeError(f"instant {instant.isoformat()} outside {MIN_YEAR}-{MAX_YEAR}")
    start = _year_start(year)
    length = (_year_start(year + 1) - start).total_seconds()
    return year + (instant - start).total_seconds() / length


def from_decimal_year(t: float) -> datetime:
    """Inverse of :func:`to_decimal_year`; returns an aware UTC datetime."""
    if not math.isfinite(t) or not MIN_YEAR <= t < MAX_YEAR:
        raise RangeError(f"decimal year {t!r} outside {MIN_YEAR}-{MAX_YEAR}")
    year = int(math.floor(t))
    start = _year_start(year)
    length = (_year_start(year + 1) - start).total_seconds()
    seconds = (t - year) * length
    # a decimal year near 2000 resolves about 7 microseconds, so round to
    # whole milliseconds; day and second stamps then round-trip exactly
    return start + timedelta(milliseconds=round(seconds * 1e3))


@dataclass(frozen=True)
class PriceSeries:
    """Ordered observations on a decimal-year axis.

    ``scale`` is ``"raw"`` for prices and ``"log"`` for natural-log prices.
    """

    t: np.ndarray
    values: np.ndarray
    scale: str = "raw"
    source: str = ""
    skipped_count: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise TimebaseError("times and values must be 1-d arrays of equal length")
        if self.scale not in ("raw", "log"):
            raise TimebaseError(f"unknown scale {self.scale!r}")
        if t.size and np.any(np.diff(t) <= 0):
            raise DuplicateTimeError("times must be strictly increasing without duplicates")
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(t)):
            raise DomainError("all times and values must be finite")
        if self.scale == "raw" and np.any(v <= 0):
            raise DomainError("raw-scale values must be strictly positive")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.t.size

    @property
    def span(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def window(self, start: float | None = None, end: float | None = None) -> "PriceSeries":
        """Sub-series with ``start <= t <= end`` (decimal years)."""
        mask = np.ones(self.t.size, dtype=bool)
        if start is not None:
            mask &= self.t >= start
        if end is not None:
            mask &= self.t <= end
        return PriceSeries(self.t[mask], self.values[mask], self.scale, self.source)

    def with_values(self, values, source: str | None = None) -> "PriceSeries":
        """Same time grid, new values (scale becomes ``log`` so any sign is admitted)."""
        return PriceSeries(self.t, values, "log", self.source if source is None else source)

    def to_log(self) -> "PriceSeries":
        if self.scale == "log":
            return self
        return PriceSeries(self.t, np.log(self.values), "log", self.source)


def _parse_date(text: str, fmt: str) -> datetime:
    if fmt == "iso":
        return _as_utc(datetime.fromisoformat(text))
    day, month, year = (int(x) for x in text.split("."))
    return datetime(year, month, day, tzinfo=timezone.utc)


def _detect_format(texts: list[str]) -> str:
    kinds = set()
    for s in texts:
        if _ISO.match(s):
            kinds.add("iso")
        elif _DOTTED.match(s):
            kinds.add("dotted")
        else:
            raise DateFormatError(f"unrecognised date {s!r}")
    if len(kinds) > 1:
        raise DateFormatError("mixed ISO-8601 and dotted dates in one file")
    return kinds.pop() if kinds else "iso"


def _coerce_bound(b) -> datetime | None:
    if b is None:
        return None
    if isinstance(b, str):
        return _parse_date(b, _detect_format([b]))
    return _as_utc(b)


def ingest_csv(
    path,
    date_column: str = "date",
    value_column: str = "value",
    start=None,
    end=None,
    scale: str = "raw",
) -> PriceSeries:
    """Read a daily price CSV into a :class:`PriceSeries`.

    Rows dated outside ``[start, end]`` are dropped. Rows whose value is
    blank or non-numeric are skipped and counted in ``skipped_count``. With
    ``scale="log"`` the natural log of each value is stored.
    """
    if scale not in ("raw", "log"):
        raise TimebaseError(f"unknown scale {scale!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyInputError(f"{path}: no header row")
        for col in (date_column, value_column):
            if col not in reader.fieldnames:
                raise TimebaseError(f"{path}: missing column {col!r}")
        rows = [(i + 2, r[date_column].strip(), (r[value_column] or "").strip())
                for i, r in enumerate(reader)]
    rows = [r for r in rows if r[1]]
    fmt = _detect_format([r[1] for r in rows])
    lo, hi = _coerce_bound(start), _coerce_bound(end)

    kept: list[tuple[datetime, float, int]] = []
    skipped = 0
    for lineno, dtext, vtext in rows:
        when = _parse_date(dtext, fmt)
        if (lo is not None and when < lo) or (hi is not None and when > hi):
            continue
        try:
            value = float(vtext)
        except ValueError:
            skipped += 1
            continue
        if not math.isfinite(value):
            skipped += 1
            continue
        kept.append((when, value, lineno))

    if not kept:
        raise EmptyInputError(f"{path}: no parseable rows in the requested window")
    kept.sort(key=lambda r: r[0])
    for a, b in zip(kept, kept[1:]):
        if a[0] == b[0]:
            raise DuplicateTimeError(f"{path}: duplicate date {a[0].date()} (lines {a[2]}, {b[2]})")

    values = np.array([v for _, v, _ in kept])
    if scale == "log":
        for _, v, lineno in kept:
            if v <= 0:
                raise DomainError(f"{path}: non-positive value {v} at line {lineno} under log scale")
        values = np.log(values)
    elif np.any(values <= 0):
        bad = next(r for r in kept if r[1] <= 0)
        raise DomainError(f"{path}: non-positive value {bad[1]} at line {bad[2]}")
    t = np.array([to_decimal_year(w) for w, _, _ in kept])
    return PriceSeries(t, values, scale, source=str(path), skipped_count=skipped)


def write_series_csv(path, t, values) -> None:
    """Write the standard ``decimal_year,value`` series format (9 significant digits)."""
    with Path(path).open("w", newline="") as fh:
        fh.write("decimal_year,value\n")
        for a, b in zip(np.asarray(t, float), np.asarray(values, float)):
            fh.write(f"{a:.9g},{b:.9g}\n")


def read_series_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def bundled_path(name: str) -> Path:
    """Path of a data file shipped in ``lpplfit/data``."""
    path = Path(__file__).parent / "data" / name
    if not path.exists():
        raise FileNotFoundError(path)
    return path
