import json
import math
import urllib.error
import urllib.request

import pytest

from castorette.service.app import ServerThread

from conftest import DAY, HOUR, T0, hourly_series, simple_model_doc
from test_platform import drain, run_train_and_score, seed


@pytest.fixture
def server(platform):
    srv = ServerThread(platform, port=0).start()
    yield platform, srv.address
    srv.stop()


def call(base, method, path, *, body=None, content_type="application/json"):
    data = None
    headers = {}
    if body is not None:
        data = (body if isinstance(body, bytes)
                else (body.encode() if isinstance(body, str)
                      else json.dumps(body).encode()))
        headers["Content-Type"] = content_type
    req = urllib.request.Request(base + path, data=data, method=method,
                                 headers=headers)
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode())


def get(base, path):
    return call(base, "GET", path)


def post(base, path, body=None, **kw):
    return call(base, "POST", path, body=body if body is not None else {}, **kw)


# ----------------------------------------------------------------------
# plumbing

def test_health_and_schema_version(server):
    _, base = server
    status, doc = get(base, "/health")
    assert status == 200
    assert doc["status"] == "ok"
    assert doc["schema_version"] == 1
    # the /api prefix reaches the same routes
    status, doc2 = get(base, "/api/health")
    assert status == 200 and doc2["status"] == "ok"


def test_unknown_endpoint_404(server):
    _, base = server
    status, doc = get(base, "/no/such/thing")
    assert status == 404
    assert doc["error"]["type"] == "NotFound"


def test_wrong_method_405(server):
    _, base = server
    status, doc = call(server[1], "POST", "/health", body={})
    assert status == 405
    assert doc["error"]["type"] == "MethodNotAllowed"


def test_missing_field_400(server):
    _, base = server
    status, doc = post(base, "/context/entities", {"nope": 1})
    assert status == 400
    assert doc["error"]["type"] == "BadRequest"
    assert "name" in doc["error"]["message"]


# ----------------------------------------------------------------------
# context endpoints

def test_context_crud_and_graph(server):
    _, base = server
    assert post(base, "/context/entity-types", {"name": "building"})[0] == 200
    assert post(base, "/context/signal-types", {"name": "power"})[0] == 200
    status, ent = post(base, "/context/entities",
                       {"name": "b1", "type": "building", "geo": [48.1, 11.6]})
    assert status == 200 and ent["geo"] == [48.1, 11.6]
    post(base, "/context/entities", {"name": "b2", "type": "building"})
    post(base, "/context/signals", {"name": "Load", "type": "power", "unit": "kW"})
    status, rel = post(base, "/context/relations",
                       {"kind": "CONNECTED_TO", "from": "b1", "to": "b2"})
    assert status == 200

    status, doc = get(base, "/context/entities")
    assert [e["name"] for e in doc["entities"]] == ["b1", "b2"]
    status, doc = get(base, "/context/signals")
    assert [s["name"] for s in doc["signals"]] == ["Load"]

    status, graph = get(base, "/context/graph")
    kinds = {n["kind"] for n in graph["nodes"]}
    assert {"entity", "signal"} <= kinds
    assert any(e["kind"] == "CONNECTED_TO" for e in graph["edges"])


def test_relation_errors_map_to_statuses(server):
    _, base = server
    post(base, "/context/entity-types", {"name": "building"})
    post(base, "/context/entities", {"name": "b1", "type": "building"})
    post(base, "/context/entities", {"name": "b2", "type": "building"})
    post(base, "/context/relations",
         {"kind": "PARENT_OF", "from": "b1", "to": "b2"})
    status, doc = post(base, "/context/relations",
                       {"kind": "PARENT_OF", "from": "b2", "to": "b1"})
    assert status == 409
    assert doc["error"]["type"] == "CycleError"
    status, doc = post(base, "/context/relations",
                       {"kind": "PARENT_OF", "from": "b1", "to": "b1"})
    assert status == 400
    assert doc["error"]["type"] == "SelfEdge"
    status, doc = post(base, "/context/entities",
                       {"name": "x", "type": "spaceship"})
    assert status == 404
    assert doc["error"]["type"] == "UnknownEntityType"


# ----------------------------------------------------------------------
# time series over HTTP

def test_ingest_then_query_round_trip(server):
    _, base = server
    post(base, "/context/entity-types", {"name": "building"})
    post(base, "/context/signal-types", {"name": "power"})
    post(base, "/context/entities", {"name": "b1", "type": "building"})
    post(base, "/context/signals", {"name": "Load", "type": "power"})

    points = [[T0 + i * HOUR, float(i)] for i in range(5)]
    status, doc = post(base, "/timeseries",
                       {"entity": "b1", "signal": "Load", "points": points})
    assert status == 200 and doc["written"] == 5

    status, doc = get(base, f"/timeseries?entity=b1&signal=Load&from={T0}&to={T0 + 3 * HOUR}")
    assert status == 200
    assert [[p["ts"], p["value"]] for p in doc["points"]] == points[:3]
    assert doc["points"][0]["time"].endswith("Z")

    # RFC3339 bounds behave identically
    t_from = doc["points"][0]["time"]
    status, doc2 = get(base, f"/timeseries?entity=b1&signal=Load&from={t_from}&to={T0 + 3 * HOUR}")
    assert doc2["points"] == doc["points"]


def test_query_unknown_context_404(server):
    _, base = server
    status, doc = get(base, f"/timeseries?entity=ghost&signal=Load&from={T0}&to={T0 + HOUR}")
    assert status == 404
    assert doc["error"]["type"] == "UnknownContext"


def test_csv_upload_modes(server):
    _, base = server
    csv_text = (
        "ts,entity,signal,value\n"
        f"{T0},b1,Load,1.0\n"
        f"{T0 + HOUR},b1,Load,abc\n"
        f"{T0 + 2 * HOUR},b1,Load,2.0\n"
    )
    status, doc = post(base, "/ingest/csv?strict=1", csv_text,
                       content_type="text/csv")
    assert status == 200
    assert doc["stored"] == 0
    assert any("strict" in e["message"] for e in doc["errors"])

    status, doc = post(base, "/ingest/csv", csv_text, content_type="text/csv")
    assert status == 200
    assert doc["stored"] == 2
    assert doc["created"] == ["entity:b1", "signal:Load"]
    assert [e["row"] for e in doc["errors"]] == [3]


# ----------------------------------------------------------------------
# models and scheduling over HTTP

@pytest.fixture
def loaded_server(server):
    platform, base = server
    seed(platform, hourly_series(days=16))
    return platform, base


def test_model_validation_maps_to_422(loaded_server):
    _, base = loaded_server
    doc = simple_model_doc(T0 + 15 * DAY)
    doc["pipeline"]["transform"] = []
    status, reply = post(base, "/models", doc)
    assert status == 422
    assert reply["error"]["type"] == "ValidationError"
    assert any(d["step"] == "transform" for d in reply["error"]["diagnostics"])


def test_full_cycle_over_http(loaded_server):
    platform, base = loaded_server
    due = T0 + 15 * DAY
    status, model = post(base, "/models", simple_model_doc(due))
    assert status == 200
    assert model["versions"] == []
    mid = model["id"]

    platform.clock.set(due + 60)
    assert post(base, "/scheduler/init")[0] == 200
    status, doc = post(base, "/scheduler/poll")
    assert status == 200
    assert [t["kind"] for t in doc["dispatched"]] == ["train"]
    drain(platform)

    platform.clock.advance(60)
    post(base, "/scheduler/update")
    status, doc = post(base, "/scheduler/poll")
    assert [t["kind"] for t in doc["dispatched"]] == ["score"]
    drain(platform)

    status, doc = get(base, f"/models/{mid}")
    assert len(doc["versions"]) == 1
    vid = doc["versions"][0]["id"]
    assert doc["versions"][0]["metrics"]["n"] > 300

    status, doc = get(base, f"/timeseries/forecast?entity=b1&signal=Load&from={due}&to={due + DAY}")
    rows = [r for r in doc["rows"] if r["forecast"] is not None]
    assert len(rows) == 24
    assert all(r["producer"] == f"model-{mid}/v{vid}" for r in rows)
    assert all(r["lower"] < r["forecast"] < r["upper"] for r in rows)

    # observations run one day past the training anchor, so the scored
    # day pairs up with real values
    status, acc = get(base, f"/timeseries/accuracy?entity=b1&signal=Load&from={due}&to={due + DAY}")
    assert status == 200
    assert acc["n"] == 24 and acc["rmse"] > 0
    status, acc = get(base, f"/timeseries/accuracy?entity=b1&signal=Load&from={due - DAY}&to={due}")
    assert acc["n"] == 0 and acc["rmse"] is None

    status, q = get(base, "/scheduler/queues")
    assert set(q) >= {"train", "score"}

    status, jobs = get(base, "/jobs/recent")
    assert [j["status"] for j in jobs["jobs"]] == ["completed", "completed"]


def test_accuracy_matches_manual_recomputation(loaded_server):
    platform, base = loaded_server
    due = T0 + 15 * DAY
    post(base, "/models", simple_model_doc(due))
    run_train_and_score(platform, due)

    status, acc = get(base, f"/timeseries/accuracy?entity=b1&signal=Load&from={due}&to={due + DAY}")
    assert status == 200 and acc["n"] == 24

    status, doc = get(base, f"/timeseries/forecast?entity=b1&signal=Load&from={due}&to={due + DAY}")
    errs = [r["observed"] - r["forecast"] for r in doc["rows"]
            if r["observed"] is not None and r["forecast"] is not None]
    rmse = math.sqrt(sum(e * e for e in errs) / len(errs))
    assert abs(rmse - acc["rmse"]) < 1e-9


def test_activate_version_changes_latest(loaded_server):
    platform, base = loaded_server
    due = T0 + 15 * DAY
    status, model = post(base, "/models", simple_model_doc(due, repeat="24h"))
    mid = model["id"]
    run_train_and_score(platform, due)
    run_train_and_score(platform, due + DAY)

    status, doc = get(base, f"/models/{mid}/versions")
    assert [v["active"] for v in doc["versions"]] == [False, False]
    v1, v2 = (v["id"] for v in doc["versions"])

    status, doc = get(base, f"/timeseries/forecast?entity=b1&signal=Load&from={due + DAY}&to={due + 2 * DAY}")
    producers = {r["producer"] for r in doc["rows"] if r["forecast"] is not None}
    assert producers == {f"model-{mid}/v{v2}"}

    status, doc = post(base, f"/models/{mid}/activate-version", {"version": v1})
    assert status == 200

    status, doc = get(base, f"/models/{mid}/versions")
    assert [v["active"] for v in doc["versions"]] == [True, False]

    status, doc = get(base, f"/timeseries/forecast?entity=b1&signal=Load&from={due}&to={due + DAY}")
    producers = {r["producer"] for r in doc["rows"] if r["forecast"] is not None}
    assert producers == {f"model-{mid}/v{v1}"}

    status, doc = post(base, f"/models/{mid}/activate-version", {"version": 999})
    assert status == 404


def test_run_now_enqueues(loaded_server):
    platform, base = loaded_server
    due = T0 + 15 * DAY
    status, model = post(base, "/models", simple_model_doc(due))
    mid = model["id"]
    platform.clock.set(due + 60)

    status, doc = post(base, f"/models/{mid}/run", {"task": "train"})
    assert status == 200
    assert doc["task"]["kind"] == "train"
    platform.scheduler.poll()
    drain(platform)
    status, doc = get(base, f"/models/{mid}/versions")
    assert len(doc["versions"]) == 1

    status, doc = post(base, f"/models/{mid}/run", {"task": "score"})
    assert status == 200 and doc["task"]["kind"] == "score"
    platform.scheduler.poll()
    drain(platform)
    status, jobs = get(base, "/jobs/recent")
    assert jobs["jobs"][-1]["job"]["kind"] == "score"
    assert jobs["jobs"][-1]["status"] == "completed"


def test_run_now_score_without_version_404(loaded_server):
    platform, base = loaded_server
    status, model = post(base, "/models", simple_model_doc(T0 + 15 * DAY))
    status, doc = post(base, f"/models/{model['id']}/run", {"task": "score"})
    assert status == 404


def test_model_list_filters(loaded_server):
    platform, base = loaded_server
    post(base, "/models", simple_model_doc(T0 + 15 * DAY))
    status, doc = get(base, "/models?entity=b1&signal=Load")
    assert [m["name"] for m in doc["models"]] == ["load-model"]
    status, doc = get(base, "/models?entity=b1&signal=Temperature")
    assert doc["models"] == []
    status, doc = get(base, "/models/hierarchy?entity=b1&signal=Load")
    assert [m["name"] for m in doc["models"]] == ["load-model"]


def test_put_version_through_bus(loaded_server):
    platform, base = loaded_server
    status, model = post(base, "/models", simple_model_doc(T0 + 15 * DAY))
    mid = model["id"]
    status, doc = post(base, f"/models/{mid}/versions",
                       {"params": "{broken", "trained_at": T0})
    assert status == 400
    assert doc["error"]["type"] == "CorruptParams"


def test_admin_snapshot(loaded_server):
    platform, base = loaded_server
    status, doc = post(base, "/admin/snapshot")
    assert status == 200 and doc["status"] == "ok"
