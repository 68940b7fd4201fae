import numpy as np
import pytest

from castorette.errors import MisalignedTimestamps, MissingFeature, ValidationError
from castorette.timeutil import parse_rfc3339
from castorette.transform.features import (
    DAY_TYPE,
    SEASON,
    TIME_OF_DAY,
    TIME_OF_YEAR,
    FeatureSpec,
    daily_stat_name,
    engineer_features,
    lag_name,
)
from castorette.transform.frame import FeatureFrame

H = 3600


def _grid(start, hours):
    return np.arange(start, start + hours * H, H, dtype=np.int64)


def test_calendar_values():
    # a Thursday morning
    t = parse_rfc3339("2018-07-12T09:00:00Z")
    frame = engineer_features([t], {}, FeatureSpec())
    assert frame.column(TIME_OF_DAY).values[0] == 9
    assert frame.column(DAY_TYPE).values[0] == "weekday"
    assert frame.column(SEASON).values[0] == "summer"
    doy = frame.column(TIME_OF_YEAR).values[0]
    assert 0 <= doy < 1
    assert doy == pytest.approx((193 - 1) / 365)


def test_day_types():
    sat = parse_rfc3339("2023-11-18T12:00:00Z")
    sun = parse_rfc3339("2023-11-19T12:00:00Z")
    frame = engineer_features([sat, sat + 86400], {}, FeatureSpec(calendar=(DAY_TYPE,)))
    assert list(frame.column(DAY_TYPE).values) == ["saturday", "sunday_holiday"]
    assert sun == sat + 86400


def test_holiday_becomes_sunday_like():
    xmas = parse_rfc3339("2023-12-25T10:00:00Z")  # a Monday
    frame = engineer_features(
        [xmas], {}, FeatureSpec(calendar=(DAY_TYPE,)), holidays=frozenset({"2023-12-25"}))
    assert frame.column(DAY_TYPE).values[0] == "sunday_holiday"


def test_all_columns_same_length():
    start = parse_rfc3339("2023-11-15T00:00:00Z")
    grid = _grid(start, 48)
    temp = (grid, np.linspace(0, 10, grid.size))
    spec = FeatureSpec(
        passthrough=("Temperature",),
        daily=(("average", "Temperature"), ("min", "Temperature"), ("max", "Temperature")),
        lags=(24,),
    )
    target = (np.concatenate([_grid(start - 24 * H, 24), grid]), np.arange(72.0))
    frame = engineer_features(grid, {"Temperature": temp}, spec, target=target)
    for name in frame.names():
        assert len(frame.column(name).values) == grid.size


def test_misaligned_grid_rejected():
    start = parse_rfc3339("2023-11-15T00:00:00Z")
    with pytest.raises(MisalignedTimestamps):
        engineer_features([start, start + 1800], {}, FeatureSpec())


def test_off_grid_covariate_rejected():
    start = parse_rfc3339("2023-11-15T00:00:00Z")
    grid = _grid(start, 4)
    bad = (np.array([start + 120]), np.array([1.0]))
    with pytest.raises(MisalignedTimestamps):
        engineer_features(grid, {"Temperature": bad},
                          FeatureSpec(passthrough=("Temperature",)))


def test_covariate_gaps_marked_missing():
    start = parse_rfc3339("2023-11-15T00:00:00Z")
    grid = _grid(start, 4)
    sparse = (grid[[0, 2]], np.array([1.0, 3.0]))
    frame = engineer_features(grid, {"Temperature": sparse},
                              FeatureSpec(passthrough=("Temperature",)))
    col = frame.column("Temperature")
    assert list(col.missing) == [False, True, False, True]
    assert col.values[1] == 0.0  # numeric columns never carry NaN


def test_daily_stats_group_by_utc_date():
    start = parse_rfc3339("2023-11-15T00:00:00Z")
    grid = _grid(start, 48)
    vals = np.concatenate([np.full(24, 2.0), np.full(24, 10.0)])
    spec = FeatureSpec(daily=(("average", "Temperature"), ("max", "Temperature")))
    frame = engineer_features(grid, {"Temperature": (grid, vals)}, spec)
    avg = frame.column(daily_stat_name("average", "Temperature")).values
    assert avg[0] == pytest.approx(2.0) and avg[30] == pytest.approx(10.0)
    mx = frame.column(daily_stat_name("max", "Temperature")).values
    assert mx[5] == pytest.approx(2.0) and mx[40] == pytest.approx(10.0)


def test_daily_stats_use_points_outside_grid():
    start = parse_rfc3339("2023-11-15T00:00:00Z")
    grid = _grid(start, 2)  # only the first two hours
    full_day = _grid(start, 24)
    vals = np.linspace(0, 23, 24)
    spec = FeatureSpec(daily=(("max", "Temperature"),))
    frame = engineer_features(grid, {"Temperature": (full_day, vals)}, spec)
    assert frame.column(daily_stat_name("max", "Temperature")).values[0] == pytest.approx(23.0)


def test_lags_read_target_history():
    start = parse_rfc3339("2023-11-15T00:00:00Z")
    grid = _grid(start, 3)
    hist_ts = np.concatenate([_grid(start - 24 * H, 24), grid])
    hist_vals = np.arange(hist_ts.size, dtype=float)
    frame = engineer_features(grid, {}, FeatureSpec(lags=(24,)),
                              target=(hist_ts, hist_vals))
    col = frame.column(lag_name(24))
    assert list(col.values) == [0.0, 1.0, 2.0]
    assert not col.missing.any()


def test_lag_without_history_is_missing():
    start = parse_rfc3339("2023-11-15T00:00:00Z")
    grid = _grid(start, 2)
    frame = engineer_features(grid, {}, FeatureSpec(lags=(24,)),
                              target=(grid, np.array([5.0, 6.0])))
    assert frame.column(lag_name(24)).missing.all()


def test_target_column_is_last_and_registered():
    start = parse_rfc3339("2023-11-15T00:00:00Z")
    grid = _grid(start, 2)
    frame = engineer_features(grid, {}, FeatureSpec(),
                              target=(grid, np.array([5.0, 6.0])))
    assert frame.target == "target"
    assert frame.names()[-1] == "target"


def test_spec_validation():
    with pytest.raises(ValidationError):
        FeatureSpec(calendar=("Weekday",))
    with pytest.raises(ValidationError):
        FeatureSpec(lags=(0,))
    with pytest.raises(ValidationError):
        FeatureSpec(daily=(("sum", "Temperature"),))


def test_frame_basics():
    frame = FeatureFrame(np.array([0, H], dtype=np.int64))
    frame.add_numeric("x", [1.0, float("nan")])
    frame.add_categorical("c", ["a", "b"], missing=[False, True])
    assert frame.is_categorical("c") and not frame.is_categorical("x")
    assert list(frame.column("x").missing) == [False, True]
    assert list(frame.column("c").missing) == [False, True]
    assert frame.column("c").values[1] == ""
    with pytest.raises(MissingFeature):
        frame.require(["x", "zzz"])
    valid = frame.valid_rows(["x", "c"])
    assert list(valid) == [True, False]


def test_frame_timestamps_must_increase():
    with pytest.raises(ValidationError):
        FeatureFrame(np.array([H, 0], dtype=np.int64))


def test_frame_subset_keeps_metadata():
    frame = FeatureFrame(np.array([0, H, 2 * H], dtype=np.int64))
    frame.add_numeric("x", [1.0, 2.0, 3.0])
    frame.add_categorical("c", ["a", "b", "a"])
    frame.target = "x"
    sub = frame.subset(np.array([True, False, True]))
    assert sub.n == 2
    assert list(sub.column("x").values) == [1.0, 3.0]
    assert list(sub.column("c").values) == ["a", "a"]
    assert sub.target == "x"
