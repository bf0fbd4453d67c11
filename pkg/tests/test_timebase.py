from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpplfit.timebase import (
    DateFormatError,
    DomainError,
    DuplicateTimeError,
    EmptyInputError,
    PriceSeries,
    RangeError,
    TimebaseError,
    bundled_path,
    from_decimal_year,
    ingest_csv,
    read_series_csv,
    to_decimal_year,
    write_series_csv,
)

UTC = timezone.utc
instants = st.datetimes(min_value=datetime(1801, 1, 1), max_value=datetime(2198, 12, 31))


def write(tmp_path, text, name="p.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_year_boundary():
    assert to_decimal_year(datetime(2016, 1, 1, tzinfo=UTC)) == 2016.0
    assert from_decimal_year(2016.0) == datetime(2016, 1, 1, tzinfo=UTC)


def test_mid_year_by_calendar_arithmetic():
    # 182.5 of 365 days
    assert to_decimal_year(datetime(2015, 7, 2, 12, tzinfo=UTC)) == pytest.approx(2015.5, abs=1e-12)
    assert from_decimal_year(2015.5) == datetime(2015, 7, 2, 12, tzinfo=UTC)


def test_leap_year_length():
    # 2016 has 366 days, so noon on 1 July is exactly half way
    assert to_decimal_year(datetime(2016, 7, 1, 23, 59, 59, tzinfo=UTC)) < 2016.5
    assert to_decimal_year(datetime(2016, 7, 2, 0, tzinfo=UTC)) == pytest.approx(2016.5, abs=1e-12)


def test_caption_date_within_tolerance():
    t = to_decimal_year(datetime(2016, 1, 26, 6, 17, tzinfo=UTC))
    assert t == pytest.approx(2016.0690, abs=5e-5)
    # the printed 2016.0719 differs by around a day; 1.5 days is the adopted tolerance
    assert abs(t - 2016.0719) * 365.25 <= 1.5


def test_naive_and_date_inputs_are_utc():
    assert to_decimal_year(datetime(2015, 7, 2, 12)) == to_decimal_year(datetime(2015, 7, 2, 12, tzinfo=UTC))
    from datetime import date

    assert to_decimal_year(date(2016, 1, 1)) == 2016.0


def test_range_errors():
    with pytest.raises(RangeError):
        to_decimal_year(datetime(1700, 1, 1))
    with pytest.raises(RangeError):
        from_decimal_year(2300.0)
    with pytest.raises(RangeError):
        from_decimal_year(float("nan"))


@settings(max_examples=1000, deadline=None)
@given(instants)
def test_round_trip_within_one_second(when):
    back = from_decimal_year(to_decimal_year(when))
    assert abs((back - when.replace(tzinfo=UTC)).total_seconds()) < 1.0


@settings(max_examples=500, deadline=None)
@given(instants)
def test_whole_second_instants_round_trip_exactly(when):
    when = when.replace(microsecond=0, tzinfo=UTC)
    assert from_decimal_year(to_decimal_year(when)) == when


@given(st.lists(instants, min_size=2, max_size=50, unique=True))
def test_strictly_monotone(whens):
    whens = sorted(whens)
    t = [to_decimal_year(w) for w in whens]
    assert all(a < b for a, b in zip(t, t[1:]))


def test_monotone_over_ten_thousand_instants(rng):
    base = datetime(1900, 1, 1, tzinfo=UTC)
    offsets = np.sort(rng.choice(300 * 365 * 86400, size=10_000, replace=False))
    t = np.array([to_decimal_year(base + timedelta(seconds=int(s))) for s in offsets])
    assert np.all(np.diff(t) > 0)


def test_leap_day_round_trip():
    when = datetime(2016, 2, 29, 13, 45, tzinfo=UTC)
    assert abs((from_decimal_year(to_decimal_year(when)) - when).total_seconds()) < 1e-3


def test_ingest_three_rows_in_time_order(tmp_path):
    path = write(tmp_path, "date,value\n2016-01-03,3\n2016-01-01,1\n2016-01-02,2\n")
    s = ingest_csv(path)
    assert len(s) == 3
    assert list(s.values) == [1.0, 2.0, 3.0]
    assert np.all(np.diff(s.t) > 0)


def test_ingest_skips_blank_value(tmp_path):
    rows = [f"2016-01-{d:02d},{'' if d == 5 else d}" for d in range(1, 11)]
    s = ingest_csv(write(tmp_path, "date,value\n" + "\n".join(rows) + "\n"))
    assert len(s) == 9
    assert s.skipped_count == 1


def test_ingest_fred_missing_marker(tmp_path):
    s = ingest_csv(write(tmp_path, "date,v\n2016-01-01,1\n2016-01-02,.\n2016-01-03,3\n"), value_column="v")
    assert len(s) == 2 and s.skipped_count == 1


def test_ingest_dotted_dates_and_window(tmp_path):
    path = write(tmp_path, "Date,Close\n01.01.2016,1\n02.01.2016,2\n03.01.2016,3\n")
    s = ingest_csv(path, "Date", "Close", start="02.01.2016", end=datetime(2016, 1, 3))
    assert list(s.values) == [2.0, 3.0]


def test_ingest_mixed_formats_rejected(tmp_path):
    with pytest.raises(DateFormatError):
        ingest_csv(write(tmp_path, "date,value\n2016-01-01,1\n02.01.2016,2\n"))


def test_ingest_duplicates_rejected(tmp_path):
    with pytest.raises(DuplicateTimeError, match="lines 2, 3"):
        ingest_csv(write(tmp_path, "date,value\n2016-01-01,1\n2016-01-01,2\n"))


def test_ingest_log_domain_error_names_line(tmp_path):
    with pytest.raises(DomainError, match="line 3"):
        ingest_csv(write(tmp_path, "date,value\n2016-01-01,1\n2016-01-02,0\n"), scale="log")


def test_ingest_log_scale(tmp_path):
    s = ingest_csv(write(tmp_path, "date,value\n2016-01-01,1\n2016-01-02,2.718281828459045\n"), scale="log")
    assert s.scale == "log"
    np.testing.assert_allclose(s.values, [0.0, 1.0])


def test_ingest_empty_and_missing_column(tmp_path):
    with pytest.raises(EmptyInputError):
        ingest_csv(write(tmp_path, "date,value\n2016-01-01,1\n"), start="2017-01-01")
    with pytest.raises(EmptyInputError):
        ingest_csv(write(tmp_path, ""))
    with pytest.raises(TimebaseError, match="missing column"):
        ingest_csv(write(tmp_path, "date,price\n2016-01-01,1\n"))


@settings(max_examples=25, deadline=None)
@given(st.permutations(range(12)))
def test_ingest_independent_of_row_order(tmp_path_factory, order):
    tmp = tmp_path_factory.mktemp("perm")
    rows = [f"2015-03-{d + 1:02d},{10 + d * 0.5}" for d in range(12)]
    a = ingest_csv(write(tmp, "date,value\n" + "\n".join(rows) + "\n", "a.csv"))
    b = ingest_csv(write(tmp, "date,value\n" + "\n".join(rows[i] for i in order) + "\n", "b.csv"))
    np.testing.assert_array_equal(a.t, b.t)
    np.testing.assert_array_equal(a.values, b.values)


def test_price_series_validation():
    with pytest.raises(DuplicateTimeError):
        PriceSeries([1.0, 1.0], [1.0, 2.0])
    with pytest.raises(DomainError):
        PriceSeries([1.0, 2.0], [1.0, -2.0])
    with pytest.raises(DomainError):
        PriceSeries([1.0, 2.0], [1.0, np.nan], "log")
    s = PriceSeries([1.0, 2.0], [1.0, -2.0], "log")
    assert s.span == (1.0, 2.0)


def test_series_csv_round_trip(tmp_path):
    t = np.array([2016.0, 2016.123456789])
    v = np.array([37.766, 1.0 / 3.0])
    path = tmp_path / "s.csv"
    write_series_csv(path, t, v)
    text = path.read_text().splitlines()
    assert text[0] == "decimal_year,value"
    assert text[2] == "2016.12346,0.333333333"
    t2, v2 = read_series_csv(path)
    np.testing.assert_allclose(v2, v, rtol=1e-8)


def test_bundled_brent_window():
    s = ingest_csv(bundled_path("brent_monthly_fred.csv"), "date", "brent_usd", "2014-07-01", "2016-01-12")
    assert len(s) >= 18
    assert s.t[0] < 2014.6 and s.t[-1] > 2015.9
    assert np.all((s.values > 20) & (s.values < 120))
