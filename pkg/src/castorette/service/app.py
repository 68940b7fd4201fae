"""JSON HTTP gateway.

Thin by design: handlers translate between HTTP and the platform's
bus/stores and do nothing else, so an API response is exactly what the
equivalent in-process call returns.  Time series reads and writes go
through the bus queues, same as the runner's.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .. import bus as queues
from ..errors import (
    CastoretteError,
    MethodNotAllowed,
    NotFound,
    ValidationError,
)
from ..sched.scheduler import KIND_SCORE, KIND_TRAIN
from ..timeutil import format_rfc3339, parse_rfc3339
from .csvio import ingest_csv

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_BODY = 64 * 1024 * 1024


def _ts(value) -> int:
    if isinstance(value, (int, float)):
        return int(value)
    text = str(value).strip()
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    return parse_rfc3339(text)


def _point_rows(points) -> list[dict]:
    rows = []
    for p in points:
        ts, value = p[0], p[1]
        row = {"ts": ts, "time": format_rfc3339(ts), "value": value}
        if len(p) > 2 and p[2] is not None:
            row["producer"] = p[2]
        rows.append(row)
    return rows


class Api:
    """Route table plus handler methods; transport-independent."""

    def __init__(self, platform, ui_dir=None):
        self.platform = platform
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.routes = [
            ("GET", re.compile(r"^/health$"), self.health),
            ("GET", re.compile(r"^/context/graph$"), self.context_graph),
            ("POST", re.compile(r"^/context/entity-types$"), self.add_entity_type),
            ("POST", re.compile(r"^/context/signal-types$"), self.add_signal_type),
            ("POST", re.compile(r"^/context/entities$"), self.add_entity),
            ("POST", re.compile(r"^/context/signals$"), self.add_signal),
            ("POST", re.compile(r"^/context/relations$"), self.add_relation),
            ("GET", re.compile(r"^/context/entities$"), self.list_entities),
            ("GET", re.compile(r"^/context/signals$"), self.list_signals),
            ("GET", re.compile(r"^/timeseries$"), self.query_series),
            ("POST", re.compile(r"^/timeseries$"), self.ingest_series),
            ("GET", re.compile(r"^/timeseries/forecast$"), self.forecast),
            ("GET", re.compile(r"^/timeseries/accuracy$"), self.accuracy),
            ("POST", re.compile(r"^/ingest/csv$"), self.csv_upload),
            ("GET", re.compile(r"^/models$"), self.list_models),
            ("POST", re.compile(r"^/models$"), self.put_model),
            ("PUT", re.compile(r"^/models$"), self.put_model),
            ("GET", re.compile(r"^/models/hierarchy$"), self.hierarchy),
            ("GET", re.compile(r"^/models/(?P<id>\d+)$"), self.get_model),
            ("GET", re.compile(r"^/models/(?P<id>\d+)/versions$"), self.list_versions),
            ("POST", re.compile(r"^/models/(?P<id>\d+)/versions$"), self.put_version),
            ("POST", re.compile(r"^/models/(?P<id>\d+)/activate-version$"),
             self.activate_version),
            ("POST", re.compile(r"^/models/(?P<id>\d+)/run$"), self.run_now),
            ("GET", re.compile(r"^/scheduler/queues$"), self.sched_queues),
            ("POST", re.compile(r"^/scheduler/(?P<action>init|poll|update)$"),
             self.sched_action),
            ("GET", re.compile(r"^/jobs/recent$"), self.recent_jobs),
            ("POST", re.compile(r"^/admin/snapshot$"), self.snapshot),
        ]

    # ------------------------------------------------------------------

    def dispatch(self, method: str, path: str, query: dict, body):
        for verb, pattern, fn in self.routes:
            m = pattern.match(path)
            if m and verb == method:
                return 200, fn(query=query, body=body, **m.groupdict())
        for verb, pattern, fn in self.routes:
            if pattern.match(path):
                raise MethodNotAllowed(f"method {method} not allowed on {path}")
        raise NotFound(f"no such endpoint: {path}")

    # ------------------------------------------------------------------
    # health and context

    def health(self, query, body):
        return {
            "status": "ok",
            "time": format_rfc3339(self.platform.clock.now()),
        }

    def context_graph(self, query, body):
        return self.platform.context.export_context_graph()

    def add_entity_type(self, query, body):
        t = self.platform.context.add_entity_type(body["name"])
        return {"id": t.id, "name": t.name}

    def add_signal_type(self, query, body):
        t = self.platform.context.add_signal_type(body["name"])
        return {"id": t.id, "name": t.name}

    def add_entity(self, query, body):
        geo = tuple(body["geo"]) if body.get("geo") else None
        e = self.platform.context.upsert_entity(body["name"], body["type"], geo=geo)
        return {"id": e.id, "name": e.name, "type_id": e.type_id, "geo": e.geo}

    def add_signal(self, query, body):
        s = self.platform.context.upsert_signal(
            body["name"], body["type"], unit=body.get("unit", ""))
        return {"id": s.id, "name": s.name, "type_id": s.type_id, "unit": s.unit}

    def add_relation(self, query, body):
        r = self.platform.context.add_relation(body["kind"], body["from"], body["to"])
        return {"kind": r.kind, "from_id": r.from_id, "to_id": r.to_id}

    def list_entities(self, query, body):
        return {"entities": [
            {"id": e.id, "name": e.name, "type_id": e.type_id, "geo": e.geo}
            for e in self.platform.context.entities()
        ]}

    def list_signals(self, query, body):
        return {"signals": [
            {"id": s.id, "name": s.name, "type_id": s.type_id, "unit": s.unit}
            for s in self.platform.context.signals()
        ]}

    # ------------------------------------------------------------------
    # time series

    def query_series(self, query, body):
        payload = {
            "entity": query["entity"],
            "signal": query["signal"],
            "kind": query.get("kind", "OBSERVED"),
            "start": _ts(query["from"]),
            "end": _ts(query["to"]),
        }
        if "producer" in query:
            payload["producer"] = query["producer"]
        reply = self.platform.bus.request(queues.TS_QUERY, payload)
        return {"points": _point_rows(reply["points"])}

    def ingest_series(self, query, body):
        batches = body["batches"] if "batches" in body else [body]
        for b in batches:
            b["points"] = [[_ts(t), v] for t, v in b["points"]]
            if "anchor" in b and b["anchor"] is not None:
                b["anchor"] = _ts(b["anchor"])
        reply = self.platform.bus.request(queues.TS_INGEST, {"batches": batches})
        return {"written": reply["written"]}

    def _forecast_rows(self, query):
        model_id = int(query["model"]) if "model" in query else None
        return self.platform.forecast_rows(
            query["entity"], query["signal"],
            _ts(query["from"]), _ts(query["to"]),
            model_id=model_id,
            version=query.get("version", "latest"),
        )

    def forecast(self, query, body):
        rows = self._forecast_rows(query)
        for row in rows:
            row["time"] = format_rfc3339(row["ts"])
        return {"rows": rows}

    def accuracy(self, query, body):
        """Server-side accuracy over a window, for cross-checking
        anything a client recomputes from the same rows."""
        rows = self._forecast_rows(query)
        paired = [
            (r["observed"], r["forecast"])
            for r in rows
            if r["observed"] is not None and r["forecast"] is not None
        ]
        if not paired:
            return {"n": 0, "rmse": None, "mae": None}
        errs = [o - f for o, f in paired]
        n = len(errs)
        rmse = (sum(e * e for e in errs) / n) ** 0.5
        mae = sum(abs(e) for e in errs) / n
        return {"n": n, "rmse": rmse, "mae": mae}

    def csv_upload(self, query, body):
        text = body if isinstance(body, str) else json.dumps(body)
        return ingest_csv(
            self.platform, text,
            strict=query.get("strict", "") in ("1", "true", "yes"),
            entity_type=query.get("entity_type", "entity"),
            signal_type=query.get("signal_type", "signal"),
        )

    # ------------------------------------------------------------------
    # models

    def _model_json(self, model) -> dict:
        versions = self.platform.models.versions(model.id)
        active = self.platform.models.active_version_id(model.id)
        return {
            "id": model.id,
            "name": model.name,
            "description": model.description,
            "target": model.target_ref.to_json(),
            "train_schedule": model.train_schedule.to_json(),
            "pipeline": model.doc.get("pipeline", {}),
            "versions": [
                {
                    "id": v.id,
                    "trained_at": format_rfc3339(v.trained_at),
                    "created_at": format_rfc3339(v.created_at),
                    "metrics": v.metrics,
                    "score_schedule": (v.score_schedule.to_json()
                                       if v.score_schedule else None),
                    "active": v.id == active,
                }
                for v in versions
            ],
        }

    def list_models(self, query, body):
        related = query.get("related", "") in ("1", "true", "yes")
        models = self.platform.models.list_models_for_context(
            query.get("entity"), query.get("signal"), include_related=related)
        return {"models": [self._model_json(m) for m in models]}

    def put_model(self, query, body):
        model = self.platform.models.store_model(body)
        return self._model_json(model)

    def get_model(self, query, body, id):
        return self._model_json(self.platform.models.get_model(int(id)))

    def hierarchy(self, query, body):
        return self.platform.models.model_hierarchy(
            query.get("entity"), query.get("signal"))

    def list_versions(self, query, body, id):
        return {"versions": self._model_json(
            self.platform.models.get_model(int(id)))["versions"]}

    def put_version(self, query, body, id):
        reply = self.platform.bus.request(queues.MODEL_PUT_VERSION, {
            "model_id": int(id),
            "params": body["params"],
            "trained_at": _ts(body["trained_at"]),
            "metrics": body.get("metrics"),
        })
        return {"version_id": reply["version_id"]}

    def activate_version(self, query, body, id):
        self.platform.models.activate_version(int(id), int(body["version"]))
        return {"model_id": int(id), "active_version": int(body["version"])}

    def run_now(self, query, body, id):
        model = self.platform.models.get_model(int(id))
        task_kind = body.get("task", KIND_SCORE)
        if task_kind == KIND_TRAIN:
            task = self.platform.scheduler.enqueue_now(
                KIND_TRAIN, model.id, model.id)
        else:
            version = self.platform.resolve_version(
                model.id, body.get("version", "latest"))
            task = self.platform.scheduler.enqueue_now(
                KIND_SCORE, version.id, model.id)
        return {"task": task.to_json()}

    # ------------------------------------------------------------------
    # scheduler and jobs

    def sched_queues(self, query, body):
        return self.platform.scheduler.queues()

    def sched_action(self, query, body, action):
        sched = self.platform.scheduler
        if action == "init":
            return sched.init()
        if action == "update":
            return sched.update()
        return {"dispatched": [t.to_json() for t in sched.poll()]}

    def recent_jobs(self, query, body):
        limit = int(query.get("limit", 50))
        return {"jobs": self.platform.recent_jobs(limit)}

    def snapshot(self, query, body):
        self.platform.snapshot()
        return {"status": "ok"}


def _error_payload(exc: Exception) -> tuple[int, dict]:
    if isinstance(exc, CastoretteError):
        doc = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ValidationError) and exc.diagnostics:
            doc["diagnostics"] = exc.diagnostics
        return exc.http_status, {"error": doc}
    if isinstance(exc, (KeyError, ValueError, TypeError)):
        name = "BadRequest"
        message = (f"missing field {exc.args[0]!r}" if isinstance(exc, KeyError)
                   else str(exc))
        return 400, {"error": {"type": name, "message": message}}
    log.exception("unhandled error")
    return 500, {"error": {"type": "InternalError", "message": str(exc)}}


class _Handler(BaseHTTPRequestHandler):
    api: Api = None  # set by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _read_body(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY:
            raise ValueError(f"body too large ({length} bytes)")
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        ctype = (self.headers.get("Content-Type") or "").split(";")[0].strip()
        if ctype in ("text/csv", "text/plain"):
            return raw.decode("utf-8")
        return json.loads(raw.decode("utf-8"))

    def _respond(self, status: int, payload: dict) -> None:
        payload = {"schema_version": SCHEMA_VERSION, **payload}
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _serve_static(self, path: str) -> None:
        root = self.api.ui_dir
        rel = path[len("/ui"):].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self._respond(404, {"error": {"type": "NotFound", "message": path}})
            return
        data = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _handle(self, method: str) -> None:
        parsed = urlparse(self.path)
        path = parsed.path.rstrip("/") or "/"
        if path.startswith("/api"):
            path = path[len("/api"):] or "/"
        if method == "GET" and path.startswith("/ui") and self.api.ui_dir:
            self._serve_static(path)
            return
        query = {k: v[-1] for k, v in parse_qs(parsed.query).items()}
        try:
            body = self._read_body() if method in ("POST", "PUT") else {}
            status, payload = self.api.dispatch(method, path, query, body)
        except Exception as exc:
            status, payload = _error_payload(exc)
        self._respond(status, payload)

    def do_GET(self):
        self._handle("GET")

    def do_POST(self):
        self._handle("POST")

    def do_PUT(self):
        self._handle("PUT")

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()


def make_server(platform, host: str = "127.0.0.1", port: int = 8080,
                ui_dir=None) -> ThreadingHTTPServer:
    api = Api(platform, ui_dir=ui_dir)
    handler = type("BoundHandler", (_Handler,), {"api": api})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


class ServerThread:
    """Serve in a background thread; used by tests and the CLI."""

    def __init__(self, platform, host="127.0.0.1", port=0, ui_dir=None):
        self.server = make_server(platform, host, port, ui_dir)
        self.thread = threading.Thread(
            target=self.server.serve_forever, name="http", daemon=True)

    @property
    def address(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ServerThread":
        self.thread.start()
        return self

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()
