"""Feature engineering over an hourly timestamp grid.

Everything here is deterministic and timezone-fixed to UTC: the same
grid, covariates and spec always produce the identical frame, which is
what makes retrains reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from ..errors import (
    MisalignedTimestamps,
    MissingCovariate,
    ValidationError,
)
from .frame import FeatureFrame

HOUR = 3600

TIME_OF_DAY = "TimeOfDay"
DAY_TYPE = "DayType"
TIME_OF_YEAR = "TimeOfYear"
SEASON = "Season"
CALENDAR_FEATURES = (TIME_OF_DAY, DAY_TYPE, TIME_OF_YEAR, SEASON)

DAY_TYPES = ("weekday", "saturday", "sunday_holiday")
SEASONS = ("winter", "spring", "summer", "autumn")

_DAILY_STATS = {"min": np.min, "max": np.max, "average": np.mean}


def daily_stat_name(stat: str, covariate: str) -> str:
    if stat not in _DAILY_STATS:
        raise ValidationError(f"unknown daily stat {stat!r}")
    return f"Daily{stat.capitalize()}{covariate}"


def lag_name(hours: int) -> str:
    return f"lag_{hours}"


@dataclass(frozen=True)
class FeatureSpec:
    calendar: tuple[str, ...] = CALENDAR_FEATURES
    passthrough: tuple[str, ...] = ()
    daily: tuple[tuple[str, str], ...] = ()
    lags: tuple[int, ...] = ()
    combinations: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        for name in self.calendar:
            if name not in CALENDAR_FEATURES:
                raise ValidationError(f"unknown calendar feature {name!r}")
        for stat, _cov in self.daily:
            if stat not in _DAILY_STATS:
                raise ValidationError(f"unknown daily stat {stat!r}")
        for h in self.lags:
            if not isinstance(h, int) or h <= 0:
                raise ValidationError("lag hours must be positive integers")

    @classmethod
    def from_config(cls, cfg: dict) -> "FeatureSpec":
        return cls(
            calendar=tuple(cfg.get("calendar", CALENDAR_FEATURES)),
            passthrough=tuple(cfg.get("passthrough", ())),
            daily=tuple((d["stat"], d["of"]) for d in cfg.get("daily", ())),
            lags=tuple(int(h) for h in cfg.get("lags", ())),
            combinations=tuple(tuple(pair) for pair in cfg.get("combinations", ())),
        )

    def output_columns(self, target_name: str = "target") -> list[str]:
        """Column names the spec will produce, target excluded."""
        cols = list(self.calendar)
        cols.extend(self.passthrough)
        cols.extend(daily_stat_name(s, c) for s, c in self.daily)
        cols.extend(lag_name(h) for h in self.lags)
        return cols


def _check_grid(timestamps) -> np.ndarray:
    ts = np.asarray(timestamps, dtype=np.int64)
    if ts.size and np.any(ts % HOUR):
        raise MisalignedTimestamps("grid timestamps must fall on hour boundaries")
    return ts


def _align(grid: np.ndarray, series, what: str):
    ts, vals = series
    ts = np.asarray(ts, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if ts.shape != vals.shape:
        raise ValidationError(f"{what}: timestamps and values differ in length")
    if grid.size:
        inside = (ts >= grid[0]) & (ts < grid[-1] + HOUR)
        if np.any(ts[inside] % HOUR):
            raise MisalignedTimestamps(f"{what} has points off the hourly grid")
    lookup = dict(zip(ts.tolist(), vals.tolist()))
    out = np.zeros(grid.size)
    miss = np.ones(grid.size, dtype=bool)
    for i, t in enumerate(grid.tolist()):
        v = lookup.get(t)
        if v is not None and np.isfinite(v):
            out[i] = v
            miss[i] = False
    return out, miss, lookup


def _utc(ts: int) -> datetime:
    return datetime.fromtimestamp(ts, tz=timezone.utc)


def _day_type(d: datetime, holidays: frozenset) -> str:
    if d.strftime("%Y-%m-%d") in holidays or d.weekday() == 6:
        return "sunday_holiday"
    if d.weekday() == 5:
        return "saturday"
    return "weekday"


def _season(d: datetime) -> str:
    return SEASONS[(d.month % 12) // 3]


def engineer_features(
    timestamps,
    covariates: dict,
    spec: FeatureSpec,
    target=None,
    target_name: str = "target",
    holidays: frozenset = frozenset(),
) -> FeatureFrame:
    """Build a feature frame on the hourly grid ``timestamps``.

    ``covariates`` maps a name to an ``(timestamps, values)`` pair;
    points outside the grid still feed the daily aggregates for their
    calendar date.  ``target`` (optional) may start before the grid so
    lag features have history to draw on.  The output frame has one
    row per grid timestamp, always.
    """
    grid = _check_grid(timestamps)
    frame = FeatureFrame(grid)
    days = [_utc(int(t)) for t in grid.tolist()]

    for name in spec.calendar:
        if name == TIME_OF_DAY:
            frame.add_numeric(name, [d.hour for d in days])
        elif name == DAY_TYPE:
            frame.add_categorical(name, [_day_type(d, holidays) for d in days])
        elif name == TIME_OF_YEAR:
            frac = [min((d.timetuple().tm_yday - 1) / 365.0, 1.0 - 1e-9) for d in days]
            frame.add_numeric(name, frac)
        elif name == SEASON:
            frame.add_categorical(name, [_season(d) for d in days])

    aligned: dict[str, tuple] = {}

    def covariate(name: str):
        if name not in covariates:
            raise MissingCovariate(f"covariate {name!r} was not supplied")
        if name not in aligned:
            aligned[name] = _align(grid, covariates[name], f"covariate {name!r}")
        return aligned[name]

    for name in spec.passthrough:
        vals, miss, _ = covariate(name)
        frame.add_numeric(name, vals, miss)

    for stat, cov in spec.daily:
        _, _, lookup = covariate(cov)
        by_date: dict[str, list[float]] = {}
        for t, v in lookup.items():
            if np.isfinite(v):
                by_date.setdefault(_utc(t).strftime("%Y-%m-%d"), []).append(v)
        fn = _DAILY_STATS[stat]
        vals = np.zeros(grid.size)
        miss = np.ones(grid.size, dtype=bool)
        for i, d in enumerate(days):
            bucket = by_date.get(d.strftime("%Y-%m-%d"))
            if bucket:
                vals[i] = float(fn(bucket))
                miss[i] = False
        frame.add_numeric(daily_stat_name(stat, cov), vals, miss)

    target_lookup: dict[int, float] = {}
    if target is not None:
        tvals, tmiss, target_lookup = _align(grid, target, "target")

    for h in spec.lags:
        if target is None:
            raise MissingCovariate(f"lag feature needs a target series ({lag_name(h)})")
        vals = np.zeros(grid.size)
        miss = np.ones(grid.size, dtype=bool)
        for i, t in enumerate(grid.tolist()):
            v = target_lookup.get(t - h * HOUR)
            if v is not None and np.isfinite(v):
                vals[i] = v
                miss[i] = False
        frame.add_numeric(lag_name(h), vals, miss)

    for cont, cat in spec.combinations:
        frame.require([cont, cat])
        if frame.is_categorical(cont) or not frame.is_categorical(cat):
            raise ValidationError(
                f"combination ({cont!r}, {cat!r}) must pair a numeric feature "
                "with a categorical one"
            )

    if target is not None:
        frame.add_numeric(target_name, tvals, tmiss)
        frame.target = target_name

    return frame
