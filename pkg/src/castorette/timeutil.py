"""Timestamp and duration parsing.

All timestamps in the system are UTC epoch seconds (int). The wire formats
are RFC 3339 for instants and ISO-8601 (or a short "90s"/"5m"/"2h"/"30d"
form) for durations.
"""

from __future__ import annotations

import re
from datetime import datetime, timedelta, timezone

_SHORT_DURATION = re.compile(r"^(\d+(?:\.\d+)?)\s*(s|m|h|d|w)$")
_ISO_DURATION = re.compile(
    r"^P(?:(?P<weeks>\d+)W)?(?:(?P<days>\d+)D)?"
    r"(?:T(?:(?P<hours>\d+)H)?(?:(?P<minutes>\d+)M)?(?:(?P<seconds>\d+(?:\.\d+)?)S)?)?$"
)

_UNIT_SECONDS = {"s": 1, "m": 60, "h": 3600, "d": 86400, "w": 604800}


def parse_rfc3339(value) -> int:
    """Parse an RFC 3339 timestamp (or epoch number) to UTC epoch seconds."""
    if isinstance(value, (int, float)):
        return int(value)
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_rfc3339(ts: int | float) -> str:
    dt = datetime.fromtimestamp(int(ts), tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_duration(value) -> int:
    """Parse a duration to seconds.

    Accepts ISO-8601 ("PT24H", "P30D"), the short CLI form ("60s", "5m",
    "2h", "30d", "1w"), or a bare number of seconds.
    """
    if isinstance(value, (int, float)):
        return int(value)
    text = str(value).strip()
    if not text:
        raise ValueError("empty duration")
    m = _SHORT_DURATION.match(text)
    if m:
        return int(float(m.group(1)) * _UNIT_SECONDS[m.group(2)])
    m = _ISO_DURATION.match(text.upper())
    if m and any(m.groupdict().values()):
        parts = {k: float(v) for k, v in m.groupdict().items() if v}
        delta = timedelta(
            weeks=parts.get("weeks", 0),
            days=parts.get("days", 0),
            hours=parts.get("hours", 0),
            minutes=parts.get("minutes", 0),
            seconds=parts.get("seconds", 0),
        )
        return int(delta.total_seconds())
    if re.fullmatch(r"\d+", text):
        return int(text)
    raise ValueError(f"unparseable duration: {value!r}")


def format_duration(seconds: int) -> str:
    """Render seconds as a compact ISO-8601 duration."""
    seconds = int(seconds)
    if seconds == 0:
        return "PT0S"
    days, rem = divmod(seconds, 86400)
    hours, rem = divmod(rem, 3600)
    minutes, secs = divmod(rem, 60)
    out = "P"
    if days:
        out += f"{days}D"
    if hours or minutes or secs:
        out += "T"
        if hours:
            out += f"{hours}H"
        if minutes:
            out += f"{minutes}M"
        if secs:
            out += f"{secs}S"
    return out


HOUR = 3600
DAY = 86400
