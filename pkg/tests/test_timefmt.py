import pytest
from hypothesis import given, strategies as st

from phishscan.timefmt import TimeParseError, format_timestamp, parse_duration, parse_timestamp


def test_parse_utc_z():
    assert parse_timestamp("1970-01-01T00:00:00Z") == 0
    assert parse_timestamp("1970-01-02T00:00:00Z") == 86400


def test_parse_offset():
    assert parse_timestamp("1970-01-01T02:00:00+02:00") == 0
    assert parse_timestamp("1969-12-31T22:00:00-02:00") == 0


def test_naive_treated_as_utc():
    assert parse_timestamp("1970-01-01T00:00:00") == 0


def test_bad_timestamp():
    with pytest.raises(TimeParseError):
        parse_timestamp("not a date")
    with pytest.raises(TimeParseError):
        parse_timestamp("")


@given(st.integers(min_value=0, max_value=4_102_444_800))
def test_format_parse_round_trip(epoch):
    assert parse_timestamp(format_timestamp(epoch)) == epoch


def test_durations():
    assert parse_duration("3d") == 3 * 86400
    assert parse_duration("12h") == 12 * 3600
    assert parse_duration("90m") == 90 * 60
    assert parse_duration("45s") == 45
    assert parse_duration("1d6h") == 86400 + 6 * 3600
    assert parse_duration("3600") == 3600


def test_bad_duration():
    with pytest.raises(TimeParseError):
        parse_duration("3w")
    with pytest.raises(TimeParseError):
        parse_duration("")
