from datetime import datetime, timezone

import numpy as np

from lpplfit.datasets import SUB_START, WINDOW_END, load_wti_daily, major_bubble, sub_bubble, sub_bubble_start
from lpplfit.fit_engine import fit
from lpplfit.timebase import to_decimal_year


def test_major_window_contents():
    s = major_bubble()
    assert s.scale == "raw"
    assert np.all((s.values > 20) & (s.values < 120))
    assert s.t[-1] <= to_decimal_year(WINDOW_END)


def test_sub_window_start_is_derived_from_major_fit():
    start = sub_bubble_start(fit(major_bubble()))
    assert start == SUB_START


def test_sub_window_contents():
    s = sub_bubble()
    assert len(s) > 100
    assert s.t[0] >= to_decimal_year(SUB_START)
    assert s.t[-1] == to_decimal_year(datetime(2016, 1, 12, tzinfo=timezone.utc))


def test_wti_missing_days_are_skipped():
    s = load_wti_daily("2015-01-01", "2015-12-31")
    assert s.skipped_count > 0
    assert 240 <= len(s) <= 260
