"""Wires stores, bus, runner, and scheduler into one process.

Also owns the bus handler implementations, i.e. the only place where
queue payloads are translated into store calls.
"""

from __future__ import annotations

import threading
from collections import deque
from pathlib import Path

from . import bus as queues
from .bus import MessageBus
from .clock import Clock
from .context.store import ContextStore
from .errors import NotFound, UnknownContext, ValidationError
from .models.store import ModelStore
from .runner import SIGMA_SUFFIX, Runner
from .sched.scheduler import Scheduler
from .tsdb.store import FORECAST, OBSERVED, RangeQuery, TimeSeriesStore


class Platform:
    def __init__(self, data_dir=None, clock: Clock | None = None,
                 workers: int | None = None, fsync: bool = True,
                 poll_every: int = 300, update_every: int = 3600,
                 holidays=frozenset()):
        self.clock = clock or Clock()
        base = Path(data_dir) if data_dir else None
        ctx_dir = base / "context" if base else None
        ts_dir = base / "series" if base else None
        model_dir = base / "models" if base else None
        self.context = ContextStore(ctx_dir, fsync=fsync)
        self.tsdb = TimeSeriesStore(self.context, ts_dir, clock=self.clock,
                                    fsync=fsync)
        self.models = ModelStore(self.context, model_dir, clock=self.clock,
                                 fsync=fsync)
        self.bus = MessageBus()
        self.runner = Runner(self.bus, holidays=holidays)
        self.scheduler = Scheduler(self.models, self.clock,
                                   dispatch=self.runner.execute,
                                   workers=workers, poll_every=poll_every,
                                   update_every=update_every)
        self.jobs: deque = deque(maxlen=256)
        self._jobs_lock = threading.Lock()
        self._subs = [
            self.bus.subscribe(queues.JOB_COMPLETED, self._record_job),
            self.bus.subscribe(queues.JOB_FAILED, self._record_job),
        ]
        self.bus.register(queues.TS_QUERY, self._handle_query)
        self.bus.register(queues.TS_INGEST, self._handle_ingest)
        self.bus.register(queues.MODEL_GET, self._handle_model_get)
        self.bus.register(queues.MODEL_PUT_VERSION, self._handle_put_version)

    # ------------------------------------------------------------------
    # bus handlers

    def _resolve(self, entity: str, signal: str):
        try:
            return self.context.resolve_context(entity, signal)
        except NotFound as exc:
            raise UnknownContext(str(exc)) from None

    def _handle_query(self, payload: dict) -> dict:
        key = self._resolve(payload["entity"], payload["signal"])
        producer = payload.get("producer")
        rq = RangeQuery(
            key=key,
            kind=payload.get("kind", OBSERVED),
            start=int(payload["start"]),
            end=int(payload["end"]),
            producer=producer,
        )
        points = self.tsdb.query(rq)
        return {"points": [[p.ts, p.value, p.producer] for p in points]}

    def _ensure_sigma_signal(self, entity: str, signal: str) -> None:
        """Sigma series are created on first write, inheriting the
        base signal's type; callers never register them by hand."""
        base_name = signal[: -len(SIGMA_SUFFIX)]
        try:
            self.context.resolve_context(entity, signal)
            return
        except NotFound:
            pass
        base = self.context.resolve_context(entity, base_name)
        base_signal = self.context.signal(base.signal_id)
        type_name = self.context.signal_type_of(base.signal_id).name
        self.context.upsert_signal(signal, type_name, unit=base_signal.unit)

    def _handle_ingest(self, payload: dict) -> dict:
        batches = []
        for b in payload["batches"]:
            if b["signal"].endswith(SIGMA_SUFFIX):
                self._ensure_sigma_signal(b["entity"], b["signal"])
            key = self._resolve(b["entity"], b["signal"])
            batches.append({
                "key": key,
                "kind": b.get("kind", OBSERVED),
                "producer": b.get("producer"),
                "anchor": b.get("anchor"),
                "points": [(int(t), float(v)) for t, v in b["points"]],
            })
        counts = self.tsdb.ingest_many(batches)
        return {"written": sum(counts)}

    def _handle_model_get(self, payload: dict) -> dict:
        if "version_id" in payload:
            version = self.models.get_version(int(payload["version_id"]))
            model = self.models.get_model(version.model_id)
            return {
                "doc": model.doc,
                "model_id": model.id,
                "version": {
                    "id": version.id,
                    "model_id": version.model_id,
                    "params": version.params,
                    "trained_at": version.trained_at,
                    "metrics": version.metrics,
                },
            }
        model = self.models.get_model(int(payload["model_id"]))
        return {"doc": model.doc, "model_id": model.id}

    def _handle_put_version(self, payload: dict) -> dict:
        version = self.models.store_version(
            int(payload["model_id"]),
            payload["params"],
            int(payload["trained_at"]),
            metrics=payload.get("metrics"),
        )
        return {"version_id": version.id}

    def _record_job(self, envelope) -> None:
        with self._jobs_lock:
            self.jobs.append({"topic": envelope.topic, **envelope.payload})

    # ------------------------------------------------------------------
    # read-side composition

    def resolve_version(self, model_id: int, version: object = "latest"):
        if version == "latest":
            v = self.models.latest_version(model_id)
            if v is None:
                raise NotFound(f"model {model_id} has no trained versions")
            return v
        return self.models.get_version(int(version))

    def forecast_rows(self, entity: str, signal: str, start: int, end: int,
                      model_id: int | None = None,
                      version: object = "latest") -> list[dict]:
        """Observed vs forecast join for a context window.

        ``version="latest"`` resolves through the model registry (the
        pinned active version wins); ``version="all"`` merges every
        forecast layer by recency instead.
        """
        key = self._resolve(entity, signal)
        producer = None
        if version != "all":
            if model_id is None:
                candidates = self.models.list_models_for_context(entity, signal)
                if not candidates:
                    raise NotFound(f"no model targets {entity}/{signal}")
                model_id = candidates[0].id
            v = self.resolve_version(model_id, version)
            producer = self.models.get_model(model_id).producer(v.id)
        return self.tsdb.forecast_vs_observed(key, start, end, version=producer)

    def recent_jobs(self, limit: int = 50) -> list[dict]:
        with self._jobs_lock:
            return list(self.jobs)[-limit:]

    # ------------------------------------------------------------------
    # lifecycle

    def snapshot(self) -> None:
        self.context.snapshot()
        self.tsdb.snapshot()
        self.models.snapshot()

    def close(self) -> None:
        self.scheduler.close()
        for sub in self._subs:
            sub.close()
        self.bus.close()
        self.tsdb.close()
        self.models.close()
        self.context.close()
