"""Crash-safe append-only journals with snapshot compaction.

Each store persists as one (or more) journals: a JSONL event log plus an
optional snapshot. Snapshots bump a generation counter and start a fresh
log, so a crash at any point leaves a readable (snapshot, logs) pair:

    <name>.snap          {"gen": g, "state": ...}   (atomic replace)
    <name>.<gen>.log     one JSON event per line

``load()`` returns the newest snapshot state plus every event logged at or
after that snapshot's generation, in order. Stores replay those events over
the snapshot state; events carry explicit ids so replay is deterministic.
"""

from __future__ import annotations

import json
import os
import re
import threading
from pathlib import Path


class Journal:
    def __init__(self, directory: str | Path, name: str, fsync: bool = True):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.name = name
        self.fsync = fsync
        self._lock = threading.Lock()
        self._gen = self._snapshot_gen()
        self._fh = None

    # -- paths ---------------------------------------------------------

    def _snap_path(self) -> Path:
        return self.dir / f"{self.name}.snap"

    def _log_path(self, gen: int) -> Path:
        return self.dir / f"{self.name}.{gen}.log"

    def _log_gens(self) -> list[int]:
        pat = re.compile(re.escape(self.name) + r"\.(\d+)\.log$")
        gens = []
        for p in self.dir.iterdir():
            m = pat.fullmatch(p.name)
            if m:
                gens.append(int(m.group(1)))
        return sorted(gens)

    def _snapshot_gen(self) -> int:
        try:
            with open(self._snap_path(), "r", encoding="utf-8") as fh:
                return int(json.load(fh)["gen"])
        except (FileNotFoundError, ValueError, KeyError, json.JSONDecodeError):
            return 0

    # -- writing ---------------------------------------------------------

    def append(self, event: dict) -> None:
        line = json.dumps(event, separators=(",", ":"))
        with self._lock:
            if self._fh is None:
                self._fh = open(self._log_path(self._gen), "a", encoding="utf-8")
            self._fh.write(line + "\n")
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())

    def write_snapshot(self, state: dict) -> None:
        """Fold current state into a snapshot and retire older logs."""
        with self._lock:
            new_gen = self._gen + 1
            tmp = self._snap_path().with_suffix(".snap.tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump({"gen": new_gen, "state": state}, fh, separators=(",", ":"))
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self._snap_path())
            if self._fh is not None:
                self._fh.close()
                self._fh = None
            old_gen = self._gen
            self._gen = new_gen
            for gen in self._log_gens():
                if gen <= old_gen:
                    try:
                        self._log_path(gen).unlink()
                    except FileNotFoundError:
                        pass

    # -- reading ---------------------------------------------------------

    def load(self) -> tuple[dict | None, list[dict]]:
        """Return (snapshot state or None, events at/after the snapshot)."""
        state = None
        snap_gen = 0
        try:
            with open(self._snap_path(), "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            state = doc["state"]
            snap_gen = int(doc["gen"])
        except (FileNotFoundError, ValueError, KeyError, json.JSONDecodeError):
            pass
        events: list[dict] = []
        for gen in self._log_gens():
            if gen < snap_gen:
                continue
            with open(self._log_path(gen), "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        events.append(json.loads(line))
                    except json.JSONDecodeError:
                        # A torn final line from a crash mid-append is
                        # expected; everything before it is committed.
                        break
        self._gen = max(snap_gen, self._gen)
        return state, events

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
