import pytest
from hypothesis import given, strategies as st

from castorette.timeutil import (
    DAY,
    HOUR,
    format_duration,
    format_rfc3339,
    parse_duration,
    parse_rfc3339,
)


def test_parse_z_suffix():
    assert parse_rfc3339("2018-07-12T09:00:00Z") == 1531386000


def test_parse_offset():
    assert parse_rfc3339("2018-07-12T11:00:00+02:00") == 1531386000


def test_naive_treated_as_utc():
    assert parse_rfc3339("2018-07-12T09:00:00") == 1531386000


def test_epoch_passthrough():
    assert parse_rfc3339(1531386000) == 1531386000
    assert parse_rfc3339(1531386000.0) == 1531386000


@given(st.integers(min_value=0, max_value=4102444800))
def test_format_parse_round_trip(ts):
    assert parse_rfc3339(format_rfc3339(ts)) == ts


@pytest.mark.parametrize("text,seconds", [
    ("90s", 90),
    ("5m", 300),
    ("2h", 2 * HOUR),
    ("30d", 30 * DAY),
    ("1w", 7 * DAY),
    ("PT24H", DAY),
    ("P30D", 30 * DAY),
    ("PT1H30M", 5400),
    (3600, HOUR),
])
def test_parse_duration(text, seconds):
    assert parse_duration(text) == seconds


@pytest.mark.parametrize("bad", ["", "abc", "h5", "P", "5x"])
def test_parse_duration_rejects(bad):
    with pytest.raises(ValueError):
        parse_duration(bad)


@given(st.integers(min_value=1, max_value=90 * DAY))
def test_duration_round_trip(seconds):
    assert parse_duration(format_duration(seconds)) == seconds
