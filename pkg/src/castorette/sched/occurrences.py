"""Occurrence arithmetic for deployment schedules.

A schedule fires at ``time + k * repeat`` for integer ``k >= 0``,
bounded by ``until`` (inclusive).  Everything here is closed-form so
enumerating far-future occurrences costs nothing.
"""

from __future__ import annotations

from ..models.spec import DeploymentConfig


def occurrences(config: DeploymentConfig, start: int, end: int,
                limit: int | None = None) -> list[int]:
    """Occurrences in ``[start, end)``, ascending, at most ``limit``."""
    if end <= start:
        return []
    out: list[int] = []
    if config.repeat == 0:
        t = config.time
        if start <= t < end and (config.until is None or t <= config.until):
            out.append(t)
        return out
    k = 0 if start <= config.time else -(-(start - config.time) // config.repeat)
    while True:
        t = config.time + k * config.repeat
        if t >= end or (config.until is not None and t > config.until):
            break
        out.append(t)
        if limit is not None and len(out) >= limit:
            break
        k += 1
    return out


def latest_due(config: DeploymentConfig, now: int) -> int | None:
    """The newest occurrence at or before ``now``, if any."""
    if now < config.time:
        return None
    if config.repeat == 0:
        t = config.time
    else:
        k = (now - config.time) // config.repeat
        t = config.time + k * config.repeat
    if config.until is not None and t > config.until:
        # the schedule may still have fired before expiring
        if config.repeat == 0:
            return None
        k = (config.until - config.time) // config.repeat
        t = config.time + k * config.repeat
        if t > config.until or t < config.time:
            return None
    return t


def next_after(config: DeploymentConfig, now: int) -> int | None:
    """The earliest occurrence strictly after ``now``, if any."""
    if now < config.time:
        t = config.time
    elif config.repeat == 0:
        return None
    else:
        k = (now - config.time) // config.repeat + 1
        t = config.time + k * config.repeat
    if config.until is not None and t > config.until:
        return None
    return t
