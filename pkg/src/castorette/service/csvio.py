"""CSV ingestion and export.

The ingest format is long-form: ``ts,entity,signal,value``, one
reading per row.  Bad rows are reported with their line number and
skipped; the rest of the file still lands.  Unknown contexts are
created on the fly under configurable default types unless strict mode
rejects them instead.
"""

from __future__ import annotations

import csv
import io
import math

from .. import bus as queues
from ..errors import MalformedRow, NotFound
from ..timeutil import format_rfc3339, parse_rfc3339

EXPECTED_HEADER = ("ts", "entity", "signal", "value")

DEFAULT_ENTITY_TYPE = "entity"
DEFAULT_SIGNAL_TYPE = "signal"


def _parse_ts(text: str) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return parse_rfc3339(text)


def ingest_csv(platform, stream, *, strict: bool = False,
               entity_type: str = DEFAULT_ENTITY_TYPE,
               signal_type: str = DEFAULT_SIGNAL_TYPE) -> dict:
    """Ingest a long-form CSV; returns a per-file report.

    Rows are grouped per context and each group is sorted by timestamp
    before the write, so an export that interleaves contexts loads
    cleanly.  The actual writes go through the ingest queue, same as
    any other producer.
    """
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream if isinstance(stream, str) else stream.decode())
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow(1, "file is empty, expected header ts,entity,signal,value")
    normalized = tuple(h.strip().lower() for h in header)
    if normalized != EXPECTED_HEADER:
        raise MalformedRow(1, f"header must be ts,entity,signal,value, got {','.join(header)!r}")

    groups: dict[tuple[str, str], list[tuple[int, float]]] = {}
    order: list[tuple[str, str]] = []
    errors: list[dict] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            errors.append({"row": line_no, "message": f"expected 4 columns, got {len(row)}"})
            continue
        raw_ts, entity, signal, raw_value = (c.strip() for c in row)
        try:
            ts = _parse_ts(raw_ts)
        except ValueError:
            errors.append({"row": line_no, "message": f"bad timestamp {raw_ts!r}"})
            continue
        try:
            value = float(raw_value)
        except ValueError:
            errors.append({"row": line_no, "message": f"bad value {raw_value!r}"})
            continue
        if not math.isfinite(value):
            errors.append({"row": line_no, "message": f"non-finite value {raw_value!r}"})
            continue
        if not entity or not signal:
            errors.append({"row": line_no, "message": "empty entity or signal"})
            continue
        key = (entity, signal)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append((ts, value))

    created: list[str] = []
    stored = 0
    kept: list[tuple[str, str]] = []
    for entity, signal in order:
        try:
            platform.context.resolve_context(entity, signal)
        except NotFound:
            if strict:
                n = len(groups[(entity, signal)])
                errors.append({
                    "row": 0,
                    "message": f"unknown context {entity}/{signal} "
                               f"rejected in strict mode ({n} rows)",
                })
                continue
            platform.context.add_entity_type(entity_type)
            platform.context.add_signal_type(signal_type)
            if not _entity_exists(platform, entity):
                platform.context.upsert_entity(entity, entity_type)
                created.append(f"entity:{entity}")
            if not _signal_exists(platform, signal):
                platform.context.upsert_signal(signal, signal_type)
                created.append(f"signal:{signal}")
        kept.append((entity, signal))

    if kept:
        batches = []
        for entity, signal in kept:
            points = sorted(groups[(entity, signal)])
            batches.append({
                "entity": entity, "signal": signal,
                "points": [[t, v] for t, v in points],
            })
            stored += len(points)
        platform.bus.request(queues.TS_INGEST, {"batches": batches})

    return {
        "stored": stored,
        "contexts": len(kept),
        "created": created,
        "errors": errors,
    }


def _entity_exists(platform, name: str) -> bool:
    return any(e.name == name for e in platform.context.entities())


def _signal_exists(platform, name: str) -> bool:
    return any(s.name == name for s in platform.context.signals())


def write_rows_csv(rows: list[dict], stream) -> None:
    """Write forecast_vs_observed rows as delimited output."""
    writer = csv.writer(stream)
    writer.writerow(["time", "ts", "observed", "forecast", "lower", "upper", "producer"])
    for row in rows:
        writer.writerow([
            format_rfc3339(row["ts"]),
            row["ts"],
            _cell(row.get("observed")),
            _cell(row.get("forecast")),
            _cell(row.get("lower")),
            _cell(row.get("upper")),
            row.get("producer") or "",
        ])


def _cell(value) -> str:
    return "" if value is None else repr(float(value))
