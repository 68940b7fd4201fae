"""Seeded backend for the dashboard contract suite.

Boots a platform in a temp dir, ingests a 17-day hourly fixture,
trains two versions and scores both onto the last day, then serves
the HTTP API. Prints one JSON line with the port and the scored
window, and exits when stdin closes.
"""

import io
import json
import sys
import tempfile

import numpy as np

from castorette.clock import Clock
from castorette.platform import Platform
from castorette.service.app import ServerThread
from castorette.service.csvio import ingest_csv
from castorette.timeutil import format_rfc3339

HOUR, DAY = 3600, 86400
T0 = 1700006400  # 2023-11-15T00:00:00Z


def fixture_csv(days):
    rng = np.random.default_rng(5)
    ts = np.arange(T0, T0 + (days + 1) * DAY, HOUR)
    hod = (ts % DAY) / HOUR
    temp = 10 + 8 * np.sin(2 * np.pi * (hod - 3) / 24) + rng.normal(0, 1, ts.size)
    n_obs = days * 24
    load = (50 + 10 * np.sin(2 * np.pi * hod[:n_obs] / 24)
            + 0.5 * temp[:n_obs] + rng.normal(0, 2, n_obs))
    buf = io.StringIO()
    buf.write("ts,entity,signal,value\n")
    for t, v in zip(ts[:n_obs], load):
        buf.write(f"{format_rfc3339(int(t))},b1,Load,{float(v)!r}\n")
    for t, v in zip(ts, temp):
        buf.write(f"{format_rfc3339(int(t))},b1,Temperature,{float(v)!r}\n")
    return buf.getvalue()


def model_doc(due):
    return {
        "name": "load-model",
        "target": {"entity": "b1", "signal": "Load"},
        "pipeline": {
            "load": {
                "covariates": [
                    {"entity": "b1", "signal": "Temperature",
                     "alias": "Temperature"},
                ],
                "train_window": "14d",
                "score_horizon": "24h",
            },
            "transform": [
                {"step": "features",
                 "calendar": ["TimeOfDay"],
                 "passthrough": ["Temperature"]},
            ],
            "train": {
                "mean_terms": [
                    {"kind": "spline", "features": ["TimeOfDay"]},
                    {"kind": "spline", "features": ["Temperature"]},
                ],
                "variance_terms": [{"kind": "spline", "features": ["TimeOfDay"]}],
            },
        },
        "train_schedule": {"task": "train", "time": due, "repeat": "24h"},
        "score_schedule": {"task": "score", "time": due, "repeat": "24h"},
    }


def cycle(p, *steps):
    for step in steps:
        step()
        p.scheduler.poll()
        assert p.scheduler.wait_idle(120)


def main():
    days = 17
    due1 = T0 + 15 * DAY
    due2 = T0 + 16 * DAY
    with tempfile.TemporaryDirectory(prefix="castorette-ui-") as tmp:
        clock = Clock.virtual(T0)
        p = Platform(data_dir=tmp, clock=clock, fsync=False)
        report = ingest_csv(p, fixture_csv(days))
        assert report["errors"] == [], report["errors"]
        model = p.models.store_model(model_doc(due1))

        clock.set(due1 + 60)
        cycle(p, p.scheduler.init)           # train v1
        clock.advance(60)
        cycle(p, p.scheduler.update)         # score v1 on day 15
        clock.set(due2 + 60)
        cycle(p, p.scheduler.update)         # train v2, rescore v1 on day 16
        clock.advance(60)
        cycle(p, p.scheduler.update)         # score v2 on day 16

        versions = p.models.versions(model.id)
        assert len(versions) == 2, [v.id for v in versions]

        server = ServerThread(p, port=0).start()
        port = int(server.address.rsplit(":", 1)[1])
        print(json.dumps({
            "port": port,
            "model_id": model.id,
            "version_ids": [v.id for v in versions],
            "window": {"from": due2, "to": due2 + DAY},
        }), flush=True)
        sys.stdin.read()
        server.stop()
        p.close()


if __name__ == "__main__":
    main()
