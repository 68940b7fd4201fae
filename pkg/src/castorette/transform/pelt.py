"""Exact changepoint detection by pruned dynamic programming.

Finds the segmentation minimising

    sum(segment costs) + penalty * (number of segments - 1)

over all possible splits of the series.  Pruning discards candidate
split points that can never again be optimal, which keeps the expected
running time close to linear without giving up exactness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteValue, TooShort, ValidationError

MEAN_NORMAL = "MEAN_NORMAL"
MEANVAR_NORMAL = "MEANVAR_NORMAL"

# Variance estimates below this are treated as degenerate and floored,
# otherwise a perfectly constant segment would have cost -inf.
_VAR_FLOOR = 1e-8
_POOLED_FLOOR = 1e-12

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Segmentation:
    """Result of a changepoint search.

    ``changepoints`` are the interior split indices, ascending; a
    changepoint at ``i`` means a new segment starts at ``i``.  Segment
    ``k`` spans ``[boundaries[k], boundaries[k+1])``.
    """

    changepoints: tuple[int, ...]
    cost: float
    penalty: float
    n: int
    segment_stats: tuple[dict, ...] = field(default=(), compare=False)

    @property
    def boundaries(self) -> tuple[int, ...]:
        return (0, *self.changepoints, self.n)

    @property
    def num_segments(self) -> int:
        return len(self.changepoints) + 1


def _as_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValidationError("series must be one-dimensional")
    if x.size and not np.all(np.isfinite(x)):
        raise NonFiniteValue("series contains non-finite values")
    return x


def segment_cost_fn(series, cost: str = MEAN_NORMAL):
    """Return ``(cost_of_segment, min_segment_length)`` for a series.

    ``cost_of_segment(s, e)`` prices the half-open segment ``[s, e)``.
    Both detection and the brute-force reference in the test suite go
    through this single implementation so they price segments
    identically.
    """
    x = _as_series(series)
    n = x.size
    s1 = np.concatenate(([0.0], np.cumsum(x)))
    s2 = np.concatenate(([0.0], np.cumsum(x * x)))

    if cost == MEAN_NORMAL:
        pooled = max(float(np.var(x)) if n else 0.0, _POOLED_FLOOR)

        def cost_mean(s: int, e: int) -> float:
            m = e - s
            rss = (s2[e] - s2[s]) - (s1[e] - s1[s]) ** 2 / m
            return max(rss, 0.0) / pooled

        return cost_mean, 1

    if cost == MEANVAR_NORMAL:

        def cost_meanvar(s: int, e: int) -> float:
            m = e - s
            rss = (s2[e] - s2[s]) - (s1[e] - s1[s]) ** 2 / m
            var = max(rss / m, _VAR_FLOOR)
            return m * (_LOG_2PI + math.log(var) + 1.0)

        return cost_meanvar, 2

    raise ValidationError(f"unknown segment cost {cost!r}")


def segmentation_cost(series, changepoints, penalty: float, cost: str = MEAN_NORMAL) -> float:
    """Objective value of an explicit segmentation (for audits and tests)."""
    x = _as_series(series)
    seg_cost, _ = segment_cost_fn(x, cost)
    bounds = [0, *changepoints, x.size]
    total = sum(seg_cost(s, e) for s, e in zip(bounds, bounds[1:]))
    return total + penalty * len(changepoints)


def pelt(series, penalty: float | None = None, cost: str = MEAN_NORMAL) -> Segmentation:
    """Exact minimum-cost segmentation of ``series``.

    ``penalty`` defaults to ``3 * log(n)``.  Ties between equal-cost
    segmentations are broken toward the earlier split point, which
    makes the result deterministic.
    """
    x = _as_series(series)
    n = x.size
    seg_cost, min_len = segment_cost_fn(x, cost)
    if n < max(2, min_len):
        raise TooShort(f"need at least {max(2, min_len)} points, got {n}")
    beta = 3.0 * math.log(n) if penalty is None else float(penalty)
    if beta <= 0.0 or not math.isfinite(beta):
        raise ValidationError("penalty must be positive and finite")

    # f[t] = optimal cost of x[:t] minus one closing penalty; prev[t]
    # is the argmin split.  Candidates are pruned with K = 0, valid
    # because both costs are subadditive over concatenation.  A pruned
    # split is only dominated at times where the dominating split can
    # legally close a segment, so condemned candidates stay usable for
    # another min_len - 1 steps before they are dropped.
    f = np.full(n + 1, np.inf)
    f[0] = -beta
    prev = np.zeros(n + 1, dtype=np.int64)
    cands: list[list] = []  # [tau, drop_at or None]

    for t in range(min_len, n + 1):
        cands = [c for c in cands if c[1] is None or c[1] > t]
        tau_new = t - min_len
        if tau_new == 0 or tau_new >= min_len:
            cands.append([tau_new, None])
        best_val = math.inf
        best_tau = 0
        vals = []
        for tau, _ in cands:
            v = f[tau] + seg_cost(tau, t)
            vals.append(v)
            if v < best_val:
                best_val = v
                best_tau = tau
        f[t] = best_val + beta
        prev[t] = best_tau
        for c, v in zip(cands, vals):
            if v > f[t] and c[1] is None:
                c[1] = t + min_len

    cps: list[int] = []
    t = n
    while t > 0:
        tau = int(prev[t])
        if tau > 0:
            cps.append(tau)
        t = tau
    cps.reverse()

    bounds = [0, *cps, n]
    stats = tuple(
        {
            "start": s,
            "end": e,
            "mean": float(np.mean(x[s:e])),
            "var": float(np.var(x[s:e])),
            "length": e - s,
        }
        for s, e in zip(bounds, bounds[1:])
    )
    return Segmentation(
        changepoints=tuple(cps),
        cost=float(f[n]),
        penalty=beta,
        n=n,
        segment_stats=stats,
    )
