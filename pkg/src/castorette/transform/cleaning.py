"""Rule-based and segmentation-based cleaning for raw telemetry.

Cleaning never rewrites values in place; implausible points are marked
missing so that later stages can decide how to handle the gaps.  The
one exception is :func:`realign`, whose whole point is to shift old
regimes onto the current one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientData, TooShort, ValidationError
from .pelt import MEAN_NORMAL, pelt

RULE_NEGATIVE = "NEGATIVE"
RULE_CONSTANT = "CONSTANT"
RULE_NONFINITE = "NONFINITE"


@dataclass(frozen=True)
class CleaningConfig:
    allow_negative: bool = False
    max_constant_run: int = 24
    pelt_penalty: float | None = None
    deviation_threshold: float = 3.0
    min_remaining_fraction: float = 0.5

    def __post_init__(self):
        if self.max_constant_run < 2:
            raise ValidationError("max_constant_run must be at least 2")
        if self.deviation_threshold <= 0:
            raise ValidationError("deviation_threshold must be positive")
        if not 0.0 < self.min_remaining_fraction <= 1.0:
            raise ValidationError("min_remaining_fraction must be in (0, 1]")


def _as_mask(missing, n: int) -> np.ndarray:
    if missing is None:
        return np.zeros(n, dtype=bool)
    m = np.asarray(missing, dtype=bool)
    if m.shape != (n,):
        raise ValidationError("missing mask length does not match values")
    return m.copy()


def remove_outliers(values, config: CleaningConfig, missing=None):
    """Mark implausible points missing; returns ``(missing, report)``.

    Rules: non-finite values, negatives (unless allowed), and runs of
    ``max_constant_run`` or more identical consecutive valid readings,
    which on sensor feeds almost always mean a stuck reporter.  Already
    missing points break constant runs, so a second pass is a no-op.
    """
    x = np.asarray(values, dtype=float)
    mask = _as_mask(missing, x.size)
    report: list[dict] = []

    bad = ~np.isfinite(x) & ~mask
    for i in np.flatnonzero(bad):
        report.append({"index": int(i), "rule": RULE_NONFINITE})
    mask |= bad

    if not config.allow_negative:
        neg = (x < 0) & np.isfinite(x) & ~mask
        for i in np.flatnonzero(neg):
            report.append({"index": int(i), "rule": RULE_NEGATIVE})
        mask |= neg

    run_start = None
    for i in range(x.size + 1):
        extends = (
            i < x.size
            and not mask[i]
            and run_start is not None
            and not mask[i - 1]
            and x[i] == x[i - 1]
        )
        if extends:
            continue
        if run_start is not None and i - run_start >= config.max_constant_run:
            for j in range(run_start, i):
                report.append({"index": int(j), "rule": RULE_CONSTANT})
            mask[run_start:i] = True
        run_start = i if i < x.size and not mask[i] else None

    report.sort(key=lambda r: r["index"])
    return mask, report


def iterative_segment_removal(values, config: CleaningConfig, missing=None):
    """Drop whole segments whose mean is far from the series median.

    The valid points are segmented once; segments are then removed one
    at a time, most deviant first, recomputing the robust location and
    scale after each removal, until every remaining segment's deviation
    score ``|segment mean - median| / MAD`` is within the threshold.
    Removal that would leave less than ``min_remaining_fraction`` of
    the valid points raises :class:`InsufficientData` instead.
    """
    x = np.asarray(values, dtype=float)
    mask = _as_mask(missing, x.size)
    valid_idx = np.flatnonzero(~mask)
    n_valid = valid_idx.size
    removed: list[dict] = []
    if n_valid < 4:
        return mask, removed

    compact = x[valid_idx]
    penalty = config.pelt_penalty
    seg = pelt(compact, penalty=penalty, cost=MEAN_NORMAL)
    bounds = seg.boundaries
    segments = [(bounds[k], bounds[k + 1]) for k in range(seg.num_segments)]
    active = list(range(len(segments)))

    while len(active) > 1:
        keep_values = np.concatenate([compact[segments[k][0] : segments[k][1]] for k in active])
        med = float(np.median(keep_values))
        mad = float(np.median(np.abs(keep_values - med)))
        mad = max(mad, 1e-12)
        scores = [
            abs(float(np.mean(compact[segments[k][0] : segments[k][1]])) - med) / mad
            for k in active
        ]
        worst = int(np.argmax(scores))
        if scores[worst] <= config.deviation_threshold:
            break
        k = active[worst]
        s, e = segments[k]
        remaining = keep_values.size - (e - s)
        if remaining / n_valid < config.min_remaining_fraction:
            raise InsufficientData(
                f"removing segment [{s},{e}) would keep {remaining}/{n_valid} points, "
                f"below the {config.min_remaining_fraction:.0%} floor"
            )
        removed.append(
            {
                "start": int(valid_idx[s]),
                "end": int(valid_idx[e - 1]) + 1,
                "mean": float(np.mean(compact[s:e])),
                "deviation": float(scores[worst]),
                "length": int(e - s),
            }
        )
        mask[valid_idx[s:e]] = True
        active.pop(worst)

    return mask, removed


@dataclass(frozen=True)
class TransferFunction:
    """Affine map fitted between two regimes of the same signal."""

    scale: float
    offset: float
    changepoint: int
    quantiles: int = field(default=0, compare=False)

    def apply(self, values) -> np.ndarray:
        return self.scale * np.asarray(values, dtype=float) + self.offset


def fit_transfer(values, changepoint: int, min_side: int = 10) -> TransferFunction:
    """Least-squares affine match of the pre-changepoint distribution
    onto the post-changepoint one, via paired quantiles.

    Quantile pairing makes the fit insensitive to how points within
    each regime are ordered, which matters because the two sides are
    not aligned in time.
    """
    x = np.asarray(values, dtype=float)
    if not 0 < changepoint < x.size:
        raise ValidationError("changepoint must be interior to the series")
    before = x[:changepoint]
    after = x[changepoint:]
    if before.size < min_side or after.size < min_side:
        raise TooShort(
            f"need {min_side} points on each side, got {before.size}/{after.size}"
        )
    k = min(before.size, after.size)
    probs = (np.arange(k) + 0.5) / k
    qb = np.quantile(before, probs)
    qa = np.quantile(after, probs)
    var_b = float(np.var(qb))
    if var_b < 1e-12:
        scale = 1.0
        offset = float(np.mean(qa) - np.mean(qb))
    else:
        scale = float(np.cov(qb, qa, bias=True)[0, 1] / var_b)
        offset = float(np.mean(qa) - scale * np.mean(qb))
    if not (math.isfinite(scale) and math.isfinite(offset)):
        raise ValidationError("transfer fit produced non-finite parameters")
    return TransferFunction(scale=scale, offset=offset, changepoint=changepoint, quantiles=k)


def realign(values, missing=None, penalty: float | None = None, max_rounds: int = 10):
    """Iteratively map older regimes onto the most recent one.

    Each round segments the valid points, fits a transfer across the
    last changepoint and applies it to everything before it.  Stops
    when no changepoint is found (or a fit is impossible), so history
    becomes usable as extra training data instead of being discarded.
    Returns ``(values, transfers)`` with a modified copy of ``values``.
    """
    x = np.asarray(values, dtype=float).copy()
    mask = _as_mask(missing, x.size)
    valid_idx = np.flatnonzero(~mask)
    transfers: list[TransferFunction] = []
    for _ in range(max_rounds):
        if valid_idx.size < 4:
            break
        compact = x[valid_idx]
        seg = pelt(compact, penalty=penalty, cost=MEAN_NORMAL)
        if not seg.changepoints:
            break
        cp = seg.changepoints[-1]
        try:
            tf = fit_transfer(compact, cp)
        except TooShort:
            break
        x[valid_idx[:cp]] = tf.apply(compact[:cp])
        transfers.append(
            TransferFunction(
                scale=tf.scale,
                offset=tf.offset,
                changepoint=int(valid_idx[cp]),
                quantiles=tf.quantiles,
            )
        )
    return x, transfers
