from .store import (
    FORECAST,
    OBSERVED,
    RangeQuery,
    SeriesLayer,
    SeriesPoint,
    TimeSeriesStore,
    SIGMA_SUFFIX,
)

__all__ = [
    "FORECAST",
    "OBSERVED",
    "RangeQuery",
    "SeriesLayer",
    "SeriesPoint",
    "TimeSeriesStore",
    "SIGMA_SUFFIX",
]
