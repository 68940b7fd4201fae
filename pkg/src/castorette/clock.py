"""Wall or virtual clock.

The scheduler and runner only ever ask the clock for "now", which makes
schedule behaviour replayable in tests: a VIRTUAL clock advances only via
explicit ticks and is monotone non-decreasing.
"""

from __future__ import annotations

import threading
import time


class Clock:
    WALL = "WALL"
    VIRTUAL = "VIRTUAL"

    def __init__(self, mode: str = WALL, start: int | float = 0):
        if mode not in (self.WALL, self.VIRTUAL):
            raise ValueError(f"unknown clock mode {mode!r}")
        self.mode = mode
        self._now = float(start)
        self._lock = threading.Lock()

    @classmethod
    def virtual(cls, start: int | float) -> "Clock":
        return cls(mode=cls.VIRTUAL, start=start)

    def now(self) -> float:
        if self.mode == self.WALL:
            return time.time()
        with self._lock:
            return self._now

    def advance(self, seconds: int | float) -> float:
        """Tick a VIRTUAL clock forward. No-op direction checks keep it monotone."""
        if self.mode != self.VIRTUAL:
            raise ValueError("advance() only applies to VIRTUAL clocks")
        if seconds < 0:
            raise ValueError("clock must be monotone non-decreasing")
        with self._lock:
            self._now += float(seconds)
            return self._now

    def set(self, ts: int | float) -> float:
        if self.mode != self.VIRTUAL:
            raise ValueError("set() only applies to VIRTUAL clocks")
        with self._lock:
            if ts < self._now:
                raise ValueError("clock must be monotone non-decreasing")
            self._now = float(ts)
            return self._now

    def sleep(self, seconds: float) -> None:
        """Real sleep in WALL mode; a virtual clock tick otherwise."""
        if self.mode == self.WALL:
            time.sleep(seconds)
        else:
            self.advance(seconds)
