import numpy as np
import pytest

from castorette.errors import NotFound
from castorette.runner import SIGMA_SUFFIX
from castorette.tsdb.store import FORECAST

from conftest import DAY, HOUR, T0, hourly_series, simple_model_doc


def seed(p, series, entity="b1"):
    ctx = p.context
    ctx.add_entity_type("building")
    ctx.add_signal_type("power")
    ctx.add_signal_type("weather")
    ctx.upsert_entity(entity, "building")
    for signal, (ts, vals) in series.items():
        ctx.upsert_signal(signal, "power" if signal == "Load" else "weather",
                          unit="kW" if signal == "Load" else "")
        key = ctx.resolve_context(entity, signal)
        p.tsdb.ingest(key, list(zip(ts.tolist(), vals.tolist())))


def drain(p, timeout=60):
    assert p.scheduler.wait_idle(timeout), "jobs still running"


def run_train_and_score(p, due):
    """One full pass: train at ``due``, then score the fresh version."""
    p.clock.set(due + 60)
    p.scheduler.init()
    p.scheduler.poll()
    drain(p)
    p.clock.advance(60)
    p.scheduler.update()
    p.scheduler.poll()
    drain(p)


@pytest.fixture
def loaded(platform):
    series = hourly_series(days=16)
    seed(platform, series)
    return platform, series


def test_train_creates_version_with_metrics(loaded):
    p, _ = loaded
    due = T0 + 15 * DAY
    model = p.models.store_model(simple_model_doc(due))
    p.clock.set(due + 60)
    p.scheduler.init()
    batch = p.scheduler.poll()
    drain(p)
    assert [t.kind for t in batch] == ["train"]
    version = p.models.latest_version(model.id)
    assert version is not None
    assert version.trained_at == due
    assert version.metrics["n"] > 300
    assert version.metrics["rmse"] < 5.0
    jobs = p.recent_jobs()
    assert jobs and jobs[-1]["topic"] == "job.completed"
    assert jobs[-1]["status"] == "completed"
    assert jobs[-1]["job"]["kind"] == "train"
    assert jobs[-1]["produced"]["version_id"] == version.id
    assert jobs[-1]["duration"] >= 0


def test_score_writes_forecast_and_sigma_layers(loaded):
    p, _ = loaded
    due = T0 + 15 * DAY
    model = p.models.store_model(simple_model_doc(due))
    run_train_and_score(p, due)
    version = p.models.latest_version(model.id)
    producer = model.producer(version.id)

    key = p.context.resolve_context("b1", "Load")
    layers = p.tsdb.layers_for(key, FORECAST)
    assert [l.producer for l in layers] == [producer]
    assert layers[0].anchor == due

    skey = p.context.resolve_context("b1", "Load" + SIGMA_SUFFIX)
    slayers = p.tsdb.layers_for(skey, FORECAST)
    assert [l.producer for l in slayers] == [producer]

    rows = p.forecast_rows("b1", "Load", due, due + DAY)
    fc = [r for r in rows if r["forecast"] is not None]
    assert len(fc) == 24
    assert all(r["producer"] == producer for r in fc)
    assert all(r["upper"] > r["forecast"] > r["lower"] for r in fc)


def test_sigma_signal_is_auto_registered(loaded):
    p, _ = loaded
    due = T0 + 15 * DAY
    p.models.store_model(simple_model_doc(due))
    with pytest.raises(NotFound):
        p.context.resolve_context("b1", "Load" + SIGMA_SUFFIX)
    run_train_and_score(p, due)
    key = p.context.resolve_context("b1", "Load" + SIGMA_SUFFIX)
    base_key = p.context.resolve_context("b1", "Load")
    assert p.context.signal(key.signal_id).unit == \
        p.context.signal(base_key.signal_id).unit
    assert p.context.signal_type_of(key.signal_id).name == \
        p.context.signal_type_of(base_key.signal_id).name


def test_rescoring_same_anchor_overwrites(loaded):
    p, _ = loaded
    due = T0 + 15 * DAY
    model = p.models.store_model(simple_model_doc(due))
    run_train_and_score(p, due)
    key = p.context.resolve_context("b1", "Load")
    before = p.forecast_rows("b1", "Load", due, due + DAY)

    # replay the identical score task: same version, same anchor
    from castorette.sched.scheduler import Task
    version = p.models.latest_version(model.id)
    p.runner.execute(Task("score", version.id, model.id, due))

    assert len(p.tsdb.layers_for(key, FORECAST)) == 1
    after = p.forecast_rows("b1", "Load", due, due + DAY)
    assert len(after) == len(before)

    # a run-now score anchors at the current clock: a distinct layer
    p.scheduler.enqueue_now("score", subject=version.id, model_id=model.id)
    p.scheduler.poll()
    drain(p)
    anchors = {l.anchor for l in p.tsdb.layers_for(key, FORECAST)}
    assert anchors == {due, int(p.clock.now())}


def test_failed_train_stores_nothing(loaded):
    p, _ = loaded
    # window reaches back before any data exists: too few rows survive
    due = T0 + 12 * HOUR
    model = p.models.store_model(simple_model_doc(due))
    p.clock.set(due + 60)
    p.scheduler.init()
    p.scheduler.poll()
    drain(p)
    assert p.scheduler.stats["failed"] == 1
    assert p.models.versions(model.id) == []
    jobs = p.recent_jobs()
    assert jobs[-1]["topic"] == "job.failed"
    assert jobs[-1]["status"] == "failed"
    assert jobs[-1]["error"] == "TooShort"
    assert jobs[-1]["produced"] is None
    assert jobs[-1]["error_log"]


def test_failed_score_leaves_no_partial_layer(loaded):
    p, series = loaded
    due = T0 + 15 * DAY
    model = p.models.store_model(simple_model_doc(due, horizon="72h"))
    # covariates stop at T0+17d; a 72h horizon from T0+15d runs past
    # them, so scoring must fail outright
    p.clock.set(due + 60)
    p.scheduler.init()
    p.scheduler.poll()
    drain(p)
    assert p.models.latest_version(model.id) is not None

    p.clock.advance(60)
    p.scheduler.update()
    p.scheduler.poll()
    drain(p)
    assert p.scheduler.stats["failed"] == 1
    key = p.context.resolve_context("b1", "Load")
    assert p.tsdb.layers_for(key, FORECAST) == []
    assert p.recent_jobs()[-1]["error"] == "MissingFeature"


def test_forecast_rows_follow_activated_version(loaded):
    p, _ = loaded
    due = T0 + 15 * DAY
    model = p.models.store_model(simple_model_doc(due, repeat="24h"))
    run_train_and_score(p, due)
    v1 = p.models.latest_version(p.models.resolve_model("load-model").id)

    # second train+score cycle a day later
    run_train_and_score(p, due + DAY)
    v2 = p.models.latest_version(model.id)
    assert v2.id != v1.id

    latest = p.forecast_rows("b1", "Load", due + DAY, due + 2 * DAY)
    fc = [r for r in latest if r["forecast"] is not None]
    assert fc and all(r["producer"] == model.producer(v2.id) for r in fc)

    p.models.activate_version(model.id, v1.id)
    pinned = p.forecast_rows("b1", "Load", due, due + DAY)
    fc = [r for r in pinned if r["forecast"] is not None]
    assert fc and all(r["producer"] == model.producer(v1.id) for r in fc)


def test_forecast_rows_without_model_raises(loaded):
    p, _ = loaded
    with pytest.raises(NotFound):
        p.forecast_rows("b1", "Load", T0, T0 + DAY)


def test_holidays_reach_feature_engineering(data_dir, monkeypatch):
    import castorette.runner as runner_mod
    from castorette.clock import Clock
    from castorette.platform import Platform

    captured = {}
    real = runner_mod.engineer_features

    def spy(grid, covs, spec, target=None, holidays=frozenset()):
        captured["holidays"] = holidays
        return real(grid, covs, spec, target=target, holidays=holidays)

    monkeypatch.setattr(runner_mod, "engineer_features", spy)
    clock = Clock.virtual(T0)
    p = Platform(data_dir=data_dir, clock=clock, fsync=False,
                 holidays={"2023-11-23"})
    try:
        seed(p, hourly_series(days=16))
        doc = simple_model_doc(T0 + 15 * DAY)
        doc["pipeline"]["load"]["holidays"] = ["2023-11-27"]
        p.models.store_model(doc)
        p.clock.set(T0 + 15 * DAY + 60)
        p.scheduler.init()
        p.scheduler.poll()
        drain(p)
        assert captured["holidays"] == {"2023-11-23", "2023-11-27"}
    finally:
        p.close()


def test_query_handler_round_trip(loaded):
    p, series = loaded
    reply = p.bus.request("ts.query", {
        "entity": "b1", "signal": "Load",
        "start": T0, "end": T0 + 3 * HOUR,
    })
    ts, vals = series["Load"]
    assert [pt[0] for pt in reply["points"]] == ts[:3].tolist()
    assert np.allclose([pt[1] for pt in reply["points"]], vals[:3])
