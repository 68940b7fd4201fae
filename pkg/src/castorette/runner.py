"""Executes train and score tasks against the bus.

The runner is deliberately store-blind: it fetches model documents,
reads series, and writes results exclusively through bus queues, so it
could run out of process without changing a line.  Every task ends in
exactly one of ``job.completed`` or ``job.failed``.
"""

from __future__ import annotations

import logging
import time

import numpy as np

from . import bus as queues
from .errors import CastoretteError, InsufficientData
from .gam.gam2 import fit_gam2, score as score_artifact
from .gam.serialize import artifact_from_blob, artifact_to_blob
from .models.spec import PipelineSpec, parse_pipeline
from .models.spec import _Diagnostics
from .sched.scheduler import KIND_TRAIN, Task
from .timeutil import HOUR
from .transform.cleaning import (
    iterative_segment_removal,
    realign,
    remove_outliers,
)
from .transform.features import engineer_features

log = logging.getLogger(__name__)

SIGMA_SUFFIX = "#sigma"


def _hour_ceil(ts: int) -> int:
    return -(-ts // HOUR) * HOUR


class Runner:
    def __init__(self, bus, holidays=frozenset()):
        self._bus = bus
        # service-level holiday calendar; pipelines may add their own
        self._holidays = frozenset(holidays)

    # ------------------------------------------------------------------

    def execute(self, task: Task) -> dict:
        started = time.monotonic()
        try:
            if task.kind == KIND_TRAIN:
                result = self._train(task)
            else:
                result = self._score(task)
        except Exception as exc:
            kind = type(exc).__name__ if isinstance(exc, CastoretteError) else "InternalError"
            self._bus.publish(queues.JOB_FAILED, {
                "job": task.to_json(),
                "status": "failed",
                "produced": None,
                "duration": round(time.monotonic() - started, 6),
                "error": kind,
                "error_log": str(exc),
            })
            raise
        self._bus.publish(queues.JOB_COMPLETED, {
            "job": task.to_json(),
            "status": "completed",
            "produced": result,
            "duration": round(time.monotonic() - started, 6),
            "error": None,
            "error_log": None,
        })
        return result

    # ------------------------------------------------------------------
    # loading helpers

    def _query(self, entity: str, signal: str, start: int, end: int):
        reply = self._bus.request(queues.TS_QUERY, {
            "entity": entity,
            "signal": signal,
            "kind": "OBSERVED",
            "start": start,
            "end": end,
        })
        pts = reply["points"]
        ts = np.asarray([p[0] for p in pts], dtype=np.int64)
        vals = np.asarray([p[1] for p in pts], dtype=float)
        return ts, vals

    def _model_for(self, task: Task) -> tuple[dict, PipelineSpec, dict | None]:
        if task.kind == KIND_TRAIN:
            reply = self._bus.request(queues.MODEL_GET, {"model_id": task.subject})
            version = None
        else:
            reply = self._bus.request(queues.MODEL_GET, {"version_id": task.subject})
            version = reply["version"]
        doc = reply["doc"]
        diag = _Diagnostics()
        pipeline = parse_pipeline(doc.get("pipeline") or {}, diag)
        diag.raise_if_any(f"model {doc.get('name')!r}")
        return doc, pipeline, version

    def _clean_target(self, pipeline: PipelineSpec, ts, values):
        """Apply the pipeline's cleaning steps to the raw target.

        Returns the (possibly realigned) values plus a report.  The
        realign step only fires when plain segment removal would
        discard too much history; aligning old regimes and retrying is
        what turns that failure into usable training data.
        """
        cfg = pipeline.cleaning_config()
        report: dict = {"outliers": 0, "segments_removed": 0, "realigned": False}
        mask = np.zeros(values.size, dtype=bool)
        if pipeline.has_step("remove_outliers"):
            mask, marked = remove_outliers(values, cfg, mask)
            report["outliers"] = len(marked)
        if pipeline.has_step("segment_removal") and values.size >= 4:
            try:
                mask, removed = iterative_segment_removal(values, cfg, mask)
            except InsufficientData:
                if not pipeline.has_step("realign"):
                    raise
                values, transfers = realign(values, mask, cfg.pelt_penalty)
                report["realigned"] = True
                report["transfers"] = len(transfers)
                mask, removed = iterative_segment_removal(values, cfg, mask)
            report["segments_removed"] = len(removed)
        keep = ~mask
        return ts[keep], values[keep], report

    def _build_frame(self, pipeline: PipelineSpec, target_doc: dict,
                     start: int, end: int, target_history_from: int):
        spec = pipeline.feature_spec()
        grid = np.arange(_hour_ceil(start), end, HOUR, dtype=np.int64)
        covs = {}
        for ref in pipeline.load.covariates:
            # a generous day of margin so daily aggregates see the
            # whole first calendar day of the window
            ts, vals = self._query(ref.entity, ref.signal, start - 86400, end)
            covs[ref.alias] = (ts, vals)
        t_ts, t_vals = self._query(
            target_doc["entity"], target_doc["signal"], target_history_from, end)
        t_ts, t_vals, report = self._clean_target(pipeline, t_ts, t_vals)
        frame = engineer_features(
            grid, covs, spec,
            target=(t_ts, t_vals),
            holidays=pipeline.load.holidays | self._holidays,
        )
        return frame, report

    # ------------------------------------------------------------------
    # tasks

    def _train(self, task: Task) -> dict:
        doc, pipeline, _ = self._model_for(task)
        spec = pipeline.feature_spec()
        lag_span = max(spec.lags, default=0) * HOUR
        start = task.due - pipeline.load.train_window
        frame, clean_report = self._build_frame(
            pipeline, doc["target"], start, task.due,
            target_history_from=start - lag_span,
        )
        artifact = fit_gam2(frame, pipeline.train)
        reply = self._bus.request(queues.MODEL_PUT_VERSION, {
            "model_id": task.model_id,
            "params": artifact_to_blob(artifact),
            "trained_at": task.due,
            "metrics": artifact.train_metrics,
        })
        return {
            "version_id": reply["version_id"],
            "metrics": artifact.train_metrics,
            "cleaning": clean_report,
        }

    def _score(self, task: Task) -> dict:
        doc, pipeline, version = self._model_for(task)
        artifact = artifact_from_blob(version["params"])
        spec = pipeline.feature_spec()
        lag_span = max(spec.lags, default=0) * HOUR
        end = task.due + pipeline.load.score_horizon
        frame, _ = self._build_frame(
            pipeline, doc["target"], task.due, end,
            target_history_from=task.due - lag_span - 86400,
        )
        out = score_artifact(artifact, frame)
        producer = f"model-{task.model_id}/v{version['id']}"
        signal = doc["target"]["signal"]
        base = {
            "entity": doc["target"]["entity"],
            "kind": "FORECAST",
            "producer": producer,
            "anchor": task.due,
        }
        ts_list = out.timestamps.tolist()
        reply = self._bus.request(queues.TS_INGEST, {"batches": [
            {**base, "signal": signal,
             "points": [[t, float(v)] for t, v in zip(ts_list, out.mu)]},
            {**base, "signal": signal + SIGMA_SUFFIX,
             "points": [[t, float(v)] for t, v in zip(ts_list, out.sigma)]},
        ]})
        return {
            "rows": len(ts_list),
            "written": reply["written"],
            "producer": producer,
            "out_of_domain": int(out.out_of_domain.sum()),
        }
