"""Append-only time-series storage keyed by context.

Series live in layers: exactly one OBSERVED layer per context key, and an
unlimited history of FORECAST layers, each stamped with the model version
that produced it and the scoring anchor it was run for. Re-running the same
(key, producer, anchor) job overwrites its layer instead of duplicating it.

Standard-deviation forecasts are ordinary series stored under the derived
sibling signal ``<signal>#sigma`` by the runner; ``forecast_vs_observed``
joins them back in as a +-1.96 sigma band.

Persistence: one journal for layer metadata (snapshot carries all points),
plus an append-only log per layer so concurrent ingests to different layers
never contend on a single file.
"""

from __future__ import annotations

import math
import threading
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..context import ContextKey, ContextStore
from ..errors import NonFiniteValue, NotFound, UnknownContext, UnsortedInput
from ..persist import Journal

OBSERVED = "OBSERVED"
FORECAST = "FORECAST"

SIGMA_SUFFIX = "#sigma"

BAND_Z = 1.96


@dataclass(frozen=True)
class SeriesPoint:
    ts: int
    value: float
    producer: Optional[int] = None  # model version id, FORECAST reads only


@dataclass
class SeriesLayer:
    id: int
    key: ContextKey
    kind: str
    producer: Optional[int]
    created_at: int
    anchor: Optional[int] = None


@dataclass(frozen=True)
class RangeQuery:
    key: ContextKey
    start: int
    end: int
    kind: str = OBSERVED
    producer: object = None  # None | "latest" | version id | iterable of ids

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"range start {self.start} must be < end {self.end}")
        if self.kind not in (OBSERVED, FORECAST):
            raise ValueError(f"unknown layer kind {self.kind!r}")


@dataclass
class _LayerData:
    meta: SeriesLayer
    ts: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)


class TimeSeriesStore:
    def __init__(self, context: ContextStore, data_dir: str | None = None,
                 clock=None, fsync: bool = True):
        self._context = context
        self._clock = clock
        self._lock = threading.RLock()
        self._layers: dict[int, _LayerData] = {}
        self._observed: dict[tuple[int, int], int] = {}
        self._forecasts: dict[tuple[int, int], list[int]] = {}
        self._identity: dict[tuple[int, int, int, Optional[int]], int] = {}
        self._next_id = 1
        self._data_dir = data_dir
        self._fsync = fsync
        self._meta_journal = Journal(data_dir, "series", fsync=fsync) if data_dir else None
        self._point_journals: dict[int, Journal] = {}
        if self._meta_journal is not None:
            self._replay()

    # ------------------------------------------------------------------
    # ingest

    def ingest(self, key: ContextKey, points: Iterable[tuple[int, float]],
               kind: str = OBSERVED, producer: int | None = None,
               anchor: int | None = None) -> int:
        return self.ingest_many([
            {"key": key, "points": points, "kind": kind,
             "producer": producer, "anchor": anchor}
        ])[0]

    def ingest_many(self, items: list[dict]) -> list[int]:
        """Validate every batch, then commit all of them atomically.

        The runner uses this to land a forecast and its sigma sibling as one
        commit: a failure in any batch leaves the store untouched.
        """
        prepared = []
        for item in items:
            key = item["key"]
            kind = item.get("kind", OBSERVED)
            producer = item.get("producer")
            anchor = item.get("anchor")
            if kind not in (OBSERVED, FORECAST):
                raise ValueError(f"unknown layer kind {kind!r}")
            if kind == FORECAST and producer is None:
                raise ValueError("FORECAST layers require a producer model version")
            ts_list, val_list = self._validate_points(item["points"])
            prepared.append((key, kind, producer, anchor, ts_list, val_list))
        with self._lock:
            for key, *_ in prepared:
                try:
                    self._context.check_key(key)
                except NotFound as exc:
                    raise UnknownContext(str(exc)) from None
            counts = []
            for key, kind, producer, anchor, ts_list, val_list in prepared:
                layer = self._layer_for_write(key, kind, producer, anchor)
                self._merge_points(layer, ts_list, val_list)
                self._log_points(layer.meta.id, ts_list, val_list)
                counts.append(len(ts_list))
            return counts

    @staticmethod
    def _validate_points(points) -> tuple[list[int], list[float]]:
        ts_list: list[int] = []
        val_list: list[float] = []
        prev = None
        for ts, value in points:
            ts = int(ts)
            value = float(value)
            if prev is not None and ts < prev:
                raise UnsortedInput(f"timestamp {ts} after {prev}")
            if not math.isfinite(value):
                raise NonFiniteValue(f"non-finite value at ts {ts}")
            ts_list.append(ts)
            val_list.append(value)
            prev = ts
        return ts_list, val_list

    def _layer_for_write(self, key: ContextKey, kind: str,
                         producer: int | None, anchor: int | None) -> _LayerData:
        pair = (key.entity_id, key.signal_id)
        now = int(self._clock.now()) if self._clock else int(time.time())
        if kind == OBSERVED:
            layer_id = self._observed.get(pair)
            if layer_id is not None:
                return self._layers[layer_id]
            layer = self._create_layer(key, kind, None, None, now)
            self._observed[pair] = layer.meta.id
            self._context.bind_series(key)
            return layer
        ident = (pair[0], pair[1], producer, anchor)
        layer_id = self._identity.get(ident)
        if layer_id is not None:
            # Re-run of the same scoring job: replace content, refresh recency.
            layer = self._layers[layer_id]
            layer.ts.clear()
            layer.values.clear()
            layer.meta.created_at = now
            self._log_meta({"op": "refresh", "id": layer_id, "created_at": now})
            self._log_point_event(layer_id, {"op": "reset"})
            return layer
        layer = self._create_layer(key, kind, producer, anchor, now)
        self._forecasts.setdefault(pair, []).append(layer.meta.id)
        self._identity[ident] = layer.meta.id
        return layer

    def _create_layer(self, key, kind, producer, anchor, created_at) -> _LayerData:
        meta = SeriesLayer(self._next_id, key, kind, producer, created_at, anchor)
        self._next_id += 1
        layer = _LayerData(meta)
        self._layers[meta.id] = layer
        self._log_meta({
            "op": "layer", "id": meta.id, "entity_id": key.entity_id,
            "signal_id": key.signal_id, "kind": kind, "producer": producer,
            "created_at": created_at, "anchor": anchor,
        })
        return layer

    @staticmethod
    def _merge_points(layer: _LayerData, ts_list: list[int], val_list: list[float]) -> None:
        for ts, value in zip(ts_list, val_list):
            idx = bisect_left(layer.ts, ts)
            if idx < len(layer.ts) and layer.ts[idx] == ts:
                layer.values[idx] = value  # last write wins
            else:
                layer.ts.insert(idx, ts)
                layer.values.insert(idx, value)

    # ------------------------------------------------------------------
    # queries

    def query(self, rq: RangeQuery) -> list[SeriesPoint]:
        with self._lock:
            try:
                self._context.check_key(rq.key)
            except NotFound as exc:
                raise UnknownContext(str(exc)) from None
            pair = (rq.key.entity_id, rq.key.signal_id)
            if rq.kind == OBSERVED:
                layer_id = self._observed.get(pair)
                if layer_id is None:
                    return []
                layer = self._layers[layer_id]
                lo = bisect_left(layer.ts, rq.start)
                hi = bisect_left(layer.ts, rq.end)
                return [SeriesPoint(layer.ts[i], layer.values[i]) for i in range(lo, hi)]
            return self._query_forecast(pair, rq.start, rq.end, rq.producer)

    def _query_forecast(self, pair, start, end, producer) -> list[SeriesPoint]:
        layer_ids = self._forecasts.get(pair, [])
        if producer is None or producer == "latest":
            selected = list(layer_ids)
        elif isinstance(producer, (set, frozenset, list, tuple)):
            wanted = set(producer)
            selected = [i for i in layer_ids if self._layers[i].meta.producer in wanted]
        else:
            selected = [i for i in layer_ids if self._layers[i].meta.producer == producer]
        # Total recency order: (created_at, layer id). Later layers win per ts.
        selected.sort(key=lambda i: (self._layers[i].meta.created_at, i))
        merged: dict[int, SeriesPoint] = {}
        for layer_id in selected:
            layer = self._layers[layer_id]
            lo = bisect_left(layer.ts, start)
            hi = bisect_left(layer.ts, end)
            for i in range(lo, hi):
                merged[layer.ts[i]] = SeriesPoint(
                    layer.ts[i], layer.values[i], layer.meta.producer)
        return [merged[ts] for ts in sorted(merged)]

    def forecast_vs_observed(self, key: ContextKey, start: int, end: int,
                             version: object = "latest") -> list[dict]:
        """Outer join of observed and forecast values on ts, with the
        uncertainty band from the sigma sibling series when present."""
        with self._lock:
            observed = {p.ts: p.value for p in self.query(RangeQuery(key, start, end))}
            forecast = {p.ts: p for p in self.query(
                RangeQuery(key, start, end, kind=FORECAST, producer=version))}
            sigma: dict[int, float] = {}
            sibling = self._sigma_sibling(key)
            if sibling is not None:
                sigma = {p.ts: p.value for p in self.query(
                    RangeQuery(sibling, start, end, kind=FORECAST, producer=version))}
            rows = []
            for ts in sorted(set(observed) | set(forecast)):
                fc = forecast.get(ts)
                row = {
                    "ts": ts,
                    "observed": observed.get(ts),
                    "forecast": fc.value if fc else None,
                    "producer": fc.producer if fc else None,
                    "lower": None,
                    "upper": None,
                }
                if fc is not None and ts in sigma:
                    row["lower"] = fc.value - BAND_Z * sigma[ts]
                    row["upper"] = fc.value + BAND_Z * sigma[ts]
                rows.append(row)
            return rows

    def _sigma_sibling(self, key: ContextKey) -> ContextKey | None:
        signal = self._context.signal(key.signal_id)
        for sig in self._context.signals():
            if sig.name == signal.name + SIGMA_SUFFIX and sig.type_id == signal.type_id:
                return ContextKey(key.entity_id, sig.id)
        return None

    def layers_for(self, key: ContextKey, kind: str | None = None) -> list[SeriesLayer]:
        with self._lock:
            pair = (key.entity_id, key.signal_id)
            ids: list[int] = []
            if kind in (None, OBSERVED) and pair in self._observed:
                ids.append(self._observed[pair])
            if kind in (None, FORECAST):
                ids.extend(self._forecasts.get(pair, []))
            return [self._layers[i].meta for i in sorted(ids)]

    # ------------------------------------------------------------------
    # persistence

    def _log_meta(self, event: dict) -> None:
        if self._meta_journal is not None:
            self._meta_journal.append(event)

    def _point_journal(self, layer_id: int) -> Journal | None:
        if self._data_dir is None:
            return None
        journal = self._point_journals.get(layer_id)
        if journal is None:
            journal = Journal(self._data_dir, f"layer_{layer_id}", fsync=self._fsync)
            self._point_journals[layer_id] = journal
        return journal

    def _log_points(self, layer_id: int, ts_list, val_list) -> None:
        self._log_point_event(layer_id, {"op": "points", "ts": ts_list, "v": val_list})

    def _log_point_event(self, layer_id: int, event: dict) -> None:
        journal = self._point_journal(layer_id)
        if journal is not None:
            journal.append(event)

    def _replay(self) -> None:
        state, events = self._meta_journal.load()
        if state is not None:
            for rec in state["layers"]:
                self._apply_meta(rec)
                layer = self._layers[rec["id"]]
                layer.ts = list(rec["ts"])
                layer.values = list(rec["v"])
            self._next_id = state["next_id"]
        for ev in events:
            self._apply_meta(ev)
        for layer_id in list(self._layers):
            journal = self._point_journal(layer_id)
            _, point_events = journal.load()
            layer = self._layers[layer_id]
            for ev in point_events:
                if ev["op"] == "reset":
                    layer.ts.clear()
                    layer.values.clear()
                elif ev["op"] == "points":
                    self._merge_points(layer, ev["ts"], ev["v"])

    def _apply_meta(self, ev: dict) -> None:
        if ev["op"] == "layer":
            key = ContextKey(ev["entity_id"], ev["signal_id"])
            meta = SeriesLayer(ev["id"], key, ev["kind"], ev["producer"],
                               ev["created_at"], ev.get("anchor"))
            self._layers[meta.id] = _LayerData(meta)
            pair = (key.entity_id, key.signal_id)
            if meta.kind == OBSERVED:
                self._observed[pair] = meta.id
            else:
                self._forecasts.setdefault(pair, []).append(meta.id)
                self._identity[(pair[0], pair[1], meta.producer, meta.anchor)] = meta.id
            self._next_id = max(self._next_id, meta.id + 1)
        elif ev["op"] == "refresh":
            self._layers[ev["id"]].meta.created_at = ev["created_at"]

    def snapshot(self) -> None:
        if self._meta_journal is None:
            return
        with self._lock:
            records = []
            for layer_id in sorted(self._layers):
                layer = self._layers[layer_id]
                m = layer.meta
                records.append({
                    "op": "layer", "id": m.id, "entity_id": m.key.entity_id,
                    "signal_id": m.key.signal_id, "kind": m.kind,
                    "producer": m.producer, "created_at": m.created_at,
                    "anchor": m.anchor, "ts": layer.ts, "v": layer.values,
                })
            self._meta_journal.write_snapshot(
                {"layers": records, "next_id": self._next_id})
            for layer_id in list(self._layers):
                journal = self._point_journal(layer_id)
                if journal is not None:
                    journal.write_snapshot({"folded": True})

    def close(self) -> None:
        if self._meta_journal is not None:
            self._meta_journal.close()
        for journal in self._point_journals.values():
            journal.close()
