"""Deployment scheduler: four queues, three actions, one worker pool.

Tasks live in (kind, bucket) queues where kind is train/score and the
bucket says whether the task is already due ("now") or pending
("later").  Three actions maintain them:

* ``init``    full scan; rebuilds every queue from the stores.
* ``poll``    dispatches everything due to the worker pool.
* ``update``  promotes newly due tasks, discovers subjects created
              since the last scan, and tops the later queues up.

A schedule that fell behind (downtime, paused clock) contributes only
its single most recent overdue occurrence; skipped occurrences are
recorded as superseded so no later scan resurrects them.
"""

from __future__ import annotations

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..clock import Clock
from ..models.store import ModelStore
from ..timeutil import format_rfc3339
from .occurrences import latest_due, next_after

log = logging.getLogger(__name__)

KIND_TRAIN = "train"
KIND_SCORE = "score"
NOW = "now"
LATER = "later"

# train-before-score at equal due times
_KIND_ORDER = {KIND_TRAIN: 0, KIND_SCORE: 1}

#: how many future occurrences per schedule the later queues hold
LATER_HORIZON = 24

WORKERS_ENV = "CASTORETTE_WORKERS"
DEFAULT_WORKERS = 4


@dataclass(frozen=True)
class Task:
    kind: str
    subject: int
    model_id: int
    due: int

    @property
    def key(self) -> tuple:
        return (self.kind, self.subject, self.due)

    def sort_key(self) -> tuple:
        return (self.due, _KIND_ORDER[self.kind], self.model_id, self.subject)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "subject": self.subject,
            "model_id": self.model_id,
            "due": format_rfc3339(self.due),
        }


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return workers
    return max(1, int(os.environ.get(WORKERS_ENV, DEFAULT_WORKERS)))


class Scheduler:
    def __init__(self, models: ModelStore, clock: Clock, dispatch=None,
                 workers: int | None = None, poll_every: int = 300,
                 update_every: int = 3600):
        self._models = models
        self._clock = clock
        self._dispatch = dispatch
        self._lock = threading.RLock()
        self._queues: dict[tuple[str, str], list[Task]] = {
            (KIND_TRAIN, NOW): [], (KIND_TRAIN, LATER): [],
            (KIND_SCORE, NOW): [], (KIND_SCORE, LATER): [],
        }
        self._done: set[tuple] = set()
        self._inflight = 0
        self._idle = threading.Condition(self._lock)
        self.stats = {"dispatched": 0, "completed": 0, "failed": 0}
        self.poll_every = poll_every
        self.update_every = update_every
        self.workers = _worker_count(workers)
        # a zero-worker pool still needs a live executor so close() works
        self._pool = ThreadPoolExecutor(
            max_workers=max(self.workers, 1), thread_name_prefix="job")
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    # ------------------------------------------------------------------
    # schedule scanning

    def _subjects(self):
        """Every (kind, subject, model_id, schedule) pair that exists."""
        for model in self._models.models():
            yield KIND_TRAIN, model.id, model.id, model.train_schedule
            for version in self._models.versions(model.id):
                if version.score_schedule is not None:
                    yield KIND_SCORE, version.id, model.id, version.score_schedule

    def _scan(self, keep_now: bool) -> None:
        now = int(self._clock.now())
        with self._lock:
            queued_now = {
                t.key for q in (self._queues[KIND_TRAIN, NOW],
                                self._queues[KIND_SCORE, NOW]) for t in q
            } if keep_now else set()
            if not keep_now:
                for bucket in self._queues.values():
                    bucket.clear()
            else:
                self._queues[KIND_TRAIN, LATER].clear()
                self._queues[KIND_SCORE, LATER].clear()

            for kind, subject, model_id, schedule in self._subjects():
                due = latest_due(schedule, now)
                if due is not None:
                    task = Task(kind, subject, model_id, due)
                    if task.key not in self._done and task.key not in queued_now:
                        # overdue occurrences older than `due` are
                        # superseded by this one: mark them done
                        self._supersede(kind, subject, schedule, due)
                        self._queues[kind, NOW].append(task)
                        queued_now.add(task.key)
                t = now
                for _ in range(LATER_HORIZON):
                    t = next_after(schedule, t)
                    if t is None:
                        break
                    self._queues[kind, LATER].append(
                        Task(kind, subject, model_id, t))
            # a scan can supersede a task still waiting in `now`; it
            # must not run alongside its replacement
            for kind in (KIND_TRAIN, KIND_SCORE):
                self._queues[kind, NOW] = [
                    t for t in self._queues[kind, NOW] if t.key not in self._done
                ]
            for bucket in self._queues.values():
                bucket.sort(key=Task.sort_key)

    def _supersede(self, kind: str, subject: int, schedule, newest: int) -> None:
        if schedule.repeat == 0:
            return
        t = newest - schedule.repeat
        while t >= schedule.time:
            key = (kind, subject, t)
            if key in self._done:
                break
            self._done.add(key)
            t -= schedule.repeat

    # ------------------------------------------------------------------
    # actions

    def init(self) -> dict:
        """Full rebuild of all four queues from the stores."""
        self._scan(keep_now=False)
        return self.queues()

    def update(self) -> dict:
        """Promote due tasks, pick up new subjects, refresh later queues."""
        self._scan(keep_now=True)
        return self.queues()

    def enqueue_now(self, kind: str, subject: int, model_id: int) -> Task:
        """Put a one-off task in the now queue, due immediately.

        It is dispatched by the next poll like any scheduled work, so
        it shows up in queue snapshots until then.
        """
        task = Task(kind, subject, model_id, int(self._clock.now()))
        with self._lock:
            bucket = self._queues[kind, NOW]
            if task.key not in self._done and all(t.key != task.key for t in bucket):
                bucket.append(task)
                bucket.sort(key=Task.sort_key)
        return task

    def poll(self) -> list[Task]:
        """Dispatch due tasks, bounded by free worker capacity.

        Overflow stays in `now` for the next poll, so a burst never
        floods the pool's backlog."""
        now = int(self._clock.now())
        with self._lock:
            due: list[Task] = []
            for kind in (KIND_TRAIN, KIND_SCORE):
                bucket = self._queues[kind, NOW]
                due.extend(t for t in bucket if t.due <= now)
                self._queues[kind, NOW] = [t for t in bucket if t.due > now]
            due.sort(key=Task.sort_key)
            free = max(self.workers - self._inflight, 0)
            batch, overflow = due[:free], due[free:]
            for task in overflow:
                self._queues[task.kind, NOW].append(task)
            for kind in (KIND_TRAIN, KIND_SCORE):
                self._queues[kind, NOW].sort(key=Task.sort_key)
            for task in batch:
                self._done.add(task.key)
                self.stats["dispatched"] += 1
                self._inflight += 1
            for task in batch:
                self._pool.submit(self._run_task, task)
        return batch

    def _run_task(self, task: Task) -> None:
        try:
            if self._dispatch is not None:
                self._dispatch(task)
            with self._lock:
                self.stats["completed"] += 1
        except Exception:
            log.exception("task %s failed", task)
            with self._lock:
                self.stats["failed"] += 1
        finally:
            with self._idle:
                self._inflight -= 1
                self._idle.notify_all()

    def wait_idle(self, timeout: float | None = None) -> bool:
        """Block until no dispatched task is still running."""
        with self._idle:
            return self._idle.wait_for(lambda: self._inflight == 0, timeout)

    # ------------------------------------------------------------------
    # observability

    def queues(self) -> dict:
        with self._lock:
            return {
                kind: {
                    bucket: [t.to_json() for t in self._queues[kind, bucket]]
                    for bucket in (NOW, LATER)
                }
                for kind in (KIND_TRAIN, KIND_SCORE)
            }

    # ------------------------------------------------------------------
    # lifecycle

    def run_forever(self) -> None:
        """Init once, then poll and update on their periods until
        :meth:`stop` is called.  Uses the injected clock throughout, so
        a virtual clock drives replays deterministically."""
        self.init()
        self.poll()
        next_poll = self._clock.now() + self.poll_every
        next_update = self._clock.now() + self.update_every
        while not self._stop.is_set():
            wake = min(next_poll, next_update)
            delay = max(0.0, wake - self._clock.now())
            if self._stop.wait(0.0):
                break
            self._clock.sleep(min(delay, 1.0))
            now = self._clock.now()
            if now >= next_update:
                self.update()
                next_update = now + self.update_every
            if now >= next_poll:
                self.poll()
                next_poll = now + self.poll_every

    def start(self) -> None:
        if self._thread is None:
            self._thread = threading.Thread(
                target=self.run_forever, name="scheduler", daemon=True)
            self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None

    def close(self) -> None:
        self.stop()
        self._pool.shutdown(wait=True)
