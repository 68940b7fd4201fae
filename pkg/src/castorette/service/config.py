"""Service configuration: JSON file, overridden by CLI flags."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class ServiceConfig:
    data_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8080
    workers: int | None = None
    ui_dir: str | None = None
    holiday_calendar: str | None = None
    poll_every: int = 300
    update_every: int = 3600
    fsync: bool = True
    scheduler: bool = True

    @classmethod
    def load(cls, path=None, **overrides) -> "ServiceConfig":
        values: dict = {}
        if path:
            doc = json.loads(Path(path).read_text())
            known = {f.name for f in fields(cls)}
            unknown = set(doc) - known
            if unknown:
                raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
            values.update(doc)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def holidays(self) -> frozenset:
        if not self.holiday_calendar:
            return frozenset()
        doc = json.loads(Path(self.holiday_calendar).read_text())
        dates = doc["holidays"] if isinstance(doc, dict) else doc
        return frozenset(str(d) for d in dates)
