import numpy as np
import pytest

from castorette.errors import InsufficientData, ValidationError
from castorette.transform.cleaning import (
    RULE_CONSTANT,
    RULE_NEGATIVE,
    RULE_NONFINITE,
    CleaningConfig,
    TransferFunction,
    fit_transfer,
    iterative_segment_removal,
    realign,
    remove_outliers,
)
from castorette.transform.pelt import pelt


def test_config_validation():
    with pytest.raises(ValidationError):
        CleaningConfig(max_constant_run=1)
    with pytest.raises(ValidationError):
        CleaningConfig(min_remaining_fraction=0.0)
    with pytest.raises(ValidationError):
        CleaningConfig(deviation_threshold=-1)


def test_marks_nonfinite_and_negative():
    x = [1.0, float("nan"), -2.0, 3.0, float("inf")]
    missing, report = remove_outliers(x, CleaningConfig())
    assert list(missing) == [False, True, True, False, True]
    rules = {r["index"]: r["rule"] for r in report}
    assert rules == {1: RULE_NONFINITE, 2: RULE_NEGATIVE, 4: RULE_NONFINITE}


def test_negatives_allowed_when_configured():
    missing, report = remove_outliers([-1.0, 2.0], CleaningConfig(allow_negative=True))
    assert not missing.any()
    assert report == []


def test_constant_run_detection():
    x = np.concatenate([np.arange(10.0), np.full(5, 7.0), np.arange(10.0)])
    missing, report = remove_outliers(x, CleaningConfig(max_constant_run=5))
    assert missing[10:15].all()
    assert not missing[:10].any() and not missing[15:].any()
    assert all(r["rule"] == RULE_CONSTANT for r in report)


def test_short_constant_run_is_kept():
    x = np.concatenate([np.arange(10.0), np.full(4, 7.0), np.arange(10.0)])
    missing, _ = remove_outliers(x, CleaningConfig(max_constant_run=5))
    assert not missing.any()


def test_remove_outliers_idempotent():
    rng = np.random.default_rng(0)
    x = rng.normal(10, 1, 200)
    x[20:60] = 5.0          # stuck sensor
    x[100] = float("nan")
    x[150] = -3.0
    cfg = CleaningConfig(max_constant_run=24)
    m1, r1 = remove_outliers(x, cfg)
    m2, r2 = remove_outliers(x, cfg, missing=m1)
    assert (m1 == m2).all()
    assert r2 == []


def test_segment_removal_drops_deviant_block():
    rng = np.random.default_rng(1)
    x = np.concatenate([
        rng.normal(10, 0.5, 100),
        rng.normal(40, 0.5, 30),    # sensor spike regime
        rng.normal(10, 0.5, 100),
    ])
    missing, report = iterative_segment_removal(x, CleaningConfig())
    assert missing[110:125].all()
    assert not missing[:95].any()
    assert report  # the removal is itemized


def test_segment_removal_keeps_homogeneous_series():
    rng = np.random.default_rng(2)
    x = rng.normal(10, 1, 150)
    missing, report = iterative_segment_removal(x, CleaningConfig())
    assert not missing.any()
    assert report == []


def test_segment_removal_respects_floor():
    rng = np.random.default_rng(3)
    # 40% of the series is deviant; dropping it would keep only 60%
    x = np.concatenate([rng.normal(10, 0.5, 90), rng.normal(90, 0.5, 60)])
    with pytest.raises(InsufficientData):
        iterative_segment_removal(x, CleaningConfig(min_remaining_fraction=0.7))
    # with a permissive floor the same series cleans fine
    missing, report = iterative_segment_removal(x, CleaningConfig(min_remaining_fraction=0.5))
    assert missing[90:].all()
    assert len(report) >= 1


def test_transfer_function_recovers_affine_shift():
    rng = np.random.default_rng(4)
    base = rng.normal(20, 3, 400)
    x = base.copy()
    x[:200] = (base[:200] - 5.0) / 2.0   # old meter: halved and offset
    tf = fit_transfer(x, 200)
    assert tf.scale == pytest.approx(2.0, rel=0.15)
    mapped = tf.apply(x[:200])
    assert abs(mapped.mean() - base[200:].mean()) < 1.0


def test_transfer_apply_shape():
    tf = TransferFunction(scale=2.0, offset=1.0, changepoint=10)
    out = tf.apply(np.array([1.0, 2.0]))
    assert out.tolist() == [3.0, 5.0]


def test_realign_removes_level_shift():
    rng = np.random.default_rng(5)
    x = np.concatenate([rng.normal(50, 1, 150), rng.normal(20, 1, 150)])
    aligned, transfers = realign(x)
    assert transfers, "a changepoint this size must be found"
    # post-alignment the series should segment as one regime
    seg = pelt(aligned, cost="MEAN_NORMAL")
    assert seg.changepoints == ()
    assert abs(aligned[:150].mean() - 20) < 1.5


def test_realign_noop_on_stationary_series():
    rng = np.random.default_rng(6)
    x = rng.normal(10, 1, 200)
    aligned, transfers = realign(x)
    assert transfers == []
    assert np.array_equal(aligned, x)


def test_realign_preserves_missing_positions():
    rng = np.random.default_rng(7)
    x = np.concatenate([rng.normal(50, 1, 120), rng.normal(20, 1, 120)])
    missing = np.zeros(x.size, dtype=bool)
    missing[10:20] = True
    aligned, _ = realign(x, missing=missing)
    assert np.array_equal(aligned[10:20], x[10:20])  # masked points untouched
