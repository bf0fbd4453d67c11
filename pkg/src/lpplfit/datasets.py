"""Bundled price extracts and the analysis windows used on them.

Two FRED extracts ship with the package:

* ``brent_monthly_fred.csv``: Brent spot, monthly averages stamped on the
  15th, 1987-05 to 2020-01 (FRED ``MCOILBRENTEU``).
* ``wti_daily_fred.csv``: WTI Cushing spot, daily, 2010 to 2018 (FRED
  ``DCOILWTICO``), ``"."`` marks holidays.

The major negative bubble is fitted on monthly Brent from mid-2014; the
faster sub-bubble needs daily sampling and uses daily WTI, which tracks Brent
closely over 2015.
"""
from __future__ import annotations

from datetime import datetime, timezone

from .model import extrema_times, n_periods
from .timebase import PriceSeries, bundled_path, from_decimal_year, ingest_csv, to_decimal_year

__all__ = ["WINDOW_END", "MAJOR_START", "load_brent_monthly", "load_wti_daily", "major_bubble",
           "sub_bubble", "sub_bubble_start"]

WINDOW_END = datetime(2016, 1, 12, tzinfo=timezone.utc)
MAJOR_START = datetime(2014, 7, 1, tzinfo=timezone.utc)
# derived by sub_bubble_start() from the default major-bubble fit; frozen so
# the window does not drift with optimiser details
SUB_START = datetime(2015, 6, 5, tzinfo=timezone.utc)


def load_brent_monthly(start=None, end=None, scale="raw") -> PriceSeries:
    return ingest_csv(bundled_path("brent_monthly_fred.csv"), "date", "brent_usd", start, end, scale)


def load_wti_daily(start=None, end=None, scale="raw") -> PriceSeries:
    return ingest_csv(bundled_path("wti_daily_fred.csv"), "date", "wti_usd", start, end, scale)


def major_bubble(scale="raw") -> PriceSeries:
    """Monthly Brent, 2014-07-01 to 2016-01-12."""
    return load_brent_monthly(MAJOR_START, WINDOW_END, scale)


def sub_bubble_start(major_fit, min_periods: float = 2.0, end: datetime = WINDOW_END) -> datetime:
    """Start of the sub-bubble window, derived from the major-bubble fit.

    The latest log-periodic maximum of the major fit that still leaves at
    least ``min_periods`` of its log-periods before ``end`` (the minimum a
    classification accepts), truncated to whole days.
    """
    p = major_fit.params
    t_end = to_decimal_year(end)
    peaks = [x for x in extrema_times(p.omega, p.phi, p.t_c, range(-6, 7), p.orientation)
             if x <= t_end and n_periods(p.omega, p.t_c, x, t_end, p.orientation) >= min_periods]
    stamp = from_decimal_year(max(peaks))
    return stamp.replace(hour=0, minute=0, second=0, microsecond=0)


def sub_bubble(scale="raw") -> PriceSeries:
    """Daily WTI from the 2015 rebound peak to 2016-01-12."""
    return load_wti_daily(SUB_START, WINDOW_END, scale)
