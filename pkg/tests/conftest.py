import io
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from castorette.clock import Clock
from castorette.platform import Platform
from castorette.timeutil import format_rfc3339

HOUR = 3600
DAY = 86400
# midnight-aligned anchor, far from any DST trickery (UTC anyway)
T0 = 1700006400  # 2023-11-15T00:00:00Z


@pytest.fixture
def data_dir(tmp_path):
    return tmp_path / "state"


@pytest.fixture
def platform(data_dir):
    clock = Clock.virtual(T0)
    p = Platform(data_dir=data_dir, clock=clock, fsync=False)
    yield p
    p.close()


def hourly_series(days, start=T0, seed=0, noise=2.0):
    """Synthetic consumption + weather on an hourly grid.

    Returns dict of name -> (ts, values). Covariates run 24h past the
    consumption series so scoring the last day has inputs.
    """
    rng = np.random.default_rng(seed)
    ts_cov = np.arange(start, start + (days + 1) * DAY, HOUR)
    hod = (ts_cov % DAY) / HOUR
    doy = (ts_cov // DAY) % 365
    temp = (10 + 8 * np.sin(2 * np.pi * (hod - 3) / 24)
            + 5 * np.sin(2 * np.pi * doy / 365) + rng.normal(0, 1, ts_cov.size))
    solar = np.clip(6 * np.sin(np.pi * (hod - 6) / 12), 0, None) + rng.normal(0, 0.3, ts_cov.size)
    dew = temp - 4 + rng.normal(0, 0.8, ts_cov.size)
    n_obs = days * 24
    load = (50 + 10 * np.sin(2 * np.pi * hod[:n_obs] / 24)
            + 0.5 * temp[:n_obs] + rng.normal(0, noise, n_obs))
    return {
        "Load": (ts_cov[:n_obs], load),
        "Temperature": (ts_cov, temp),
        "SolarRadiance": (ts_cov, solar),
        "DewPoint": (ts_cov, dew),
    }


def series_csv(series, entity="b1"):
    buf = io.StringIO()
    buf.write("ts,entity,signal,value\n")
    for signal, (ts, vals) in series.items():
        for t, v in zip(ts, vals):
            buf.write(f"{format_rfc3339(int(t))},{entity},{signal},{float(v)!r}\n")
    return buf.getvalue()


def simple_model_doc(due, *, name="load-model", entity="b1",
                     train_window="14d", horizon="24h",
                     repeat="24h", extra_transform=()):
    """Small fast pipeline: TimeOfDay + Temperature splines."""
    return {
        "name": name,
        "target": {"entity": entity, "signal": "Load"},
        "pipeline": {
            "load": {
                "covariates": [
                    {"entity": entity, "signal": "Temperature", "alias": "Temperature"},
                ],
                "train_window": train_window,
                "score_horizon": horizon,
            },
            "transform": [
                {"step": "remove_outliers"},
                *extra_transform,
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
                "boosting": False,
            },
        },
        "train_schedule": {"task": "train", "time": due, "repeat": repeat},
        "score_schedule": {"task": "score", "time": due, "repeat": repeat},
    }
