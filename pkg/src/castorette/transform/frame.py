"""Columnar feature container with explicit missingness.

Numeric columns never hold NaN; a missing observation is a zero value
plus a set bit in the column's mask.  Keeping the mask explicit forces
every consumer to decide what "missing" means for it instead of
inheriting NaN propagation by accident.
"""

from __future__ import annotations

import numpy as np

from ..errors import MissingFeature, ValidationError


class Column:
    __slots__ = ("values", "missing", "categorical")

    def __init__(self, values: np.ndarray, missing: np.ndarray, categorical: bool):
        self.values = values
        self.missing = missing
        self.categorical = categorical


class FeatureFrame:
    def __init__(self, timestamps):
        ts = np.asarray(timestamps, dtype=np.int64)
        if ts.ndim != 1:
            raise ValidationError("timestamps must be one-dimensional")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise ValidationError("timestamps must be strictly increasing")
        self.timestamps = ts
        self.target: str | None = None
        self._cols: dict[str, Column] = {}

    @property
    def n(self) -> int:
        return int(self.timestamps.size)

    def names(self) -> list[str]:
        return list(self._cols)

    def __contains__(self, name: str) -> bool:
        return name in self._cols

    def _check_new(self, name: str, values, missing):
        if name in self._cols:
            raise ValidationError(f"column {name!r} already present")
        mask = (
            np.zeros(self.n, dtype=bool)
            if missing is None
            else np.asarray(missing, dtype=bool).copy()
        )
        if len(values) != self.n or mask.shape != (self.n,):
            raise ValidationError(f"column {name!r} length does not match frame")
        return mask

    def add_numeric(self, name: str, values, missing=None) -> None:
        mask = self._check_new(name, values, missing)
        vals = np.asarray(values, dtype=float).copy()
        mask |= ~np.isfinite(vals)
        vals[mask] = 0.0
        self._cols[name] = Column(vals, mask, categorical=False)

    def add_categorical(self, name: str, values, missing=None) -> None:
        mask = self._check_new(name, values, missing)
        vals = np.asarray([str(v) for v in values], dtype=object)
        vals[mask] = ""
        self._cols[name] = Column(vals, mask, categorical=True)

    def column(self, name: str) -> Column:
        try:
            return self._cols[name]
        except KeyError:
            raise MissingFeature(f"frame has no column {name!r}") from None

    def is_categorical(self, name: str) -> bool:
        return self.column(name).categorical

    def require(self, names) -> None:
        absent = sorted(set(names) - set(self._cols))
        if absent:
            raise MissingFeature(f"frame is missing columns: {', '.join(absent)}")

    def valid_rows(self, names) -> np.ndarray:
        """Rows where every named column is present."""
        self.require(names)
        ok = np.ones(self.n, dtype=bool)
        for name in names:
            ok &= ~self._cols[name].missing
        return ok

    def subset(self, row_mask) -> "FeatureFrame":
        mask = np.asarray(row_mask, dtype=bool)
        out = FeatureFrame(self.timestamps[mask])
        out.target = self.target
        for name, col in self._cols.items():
            out._cols[name] = Column(
                col.values[mask].copy(), col.missing[mask].copy(), col.categorical
            )
        return out
