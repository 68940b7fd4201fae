"""In-process message bus: request/reply queues plus pub/sub topics.

Component boundaries talk through here rather than calling each other
directly, so any queue can later be remapped onto an external broker
without touching the callers.  Handlers run on a worker pool;
exceptions raised by a handler propagate to the requester unchanged.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass, field

from .errors import BusTimeout, NoHandler

log = logging.getLogger(__name__)

# well-known queue names
TS_QUERY = "ts.query"
TS_INGEST = "ts.ingest"
MODEL_GET = "model.get"
MODEL_PUT_VERSION = "model.put_version"
JOB_COMPLETED = "job.completed"
JOB_FAILED = "job.failed"

DEFAULT_BUFFER = 256


@dataclass(frozen=True)
class Envelope:
    topic: str
    payload: dict
    correlation_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    sent_at: float = field(default_factory=time.time)


class Subscription:
    """A bounded per-subscriber buffer.

    A slow consumer loses its *oldest* buffered messages first; the
    publisher is never blocked and other subscribers are unaffected.
    """

    def __init__(self, bus: "MessageBus", topic: str, maxsize: int):
        self._bus = bus
        self.topic = topic
        self._buffer: queue.Queue = queue.Queue(maxsize=maxsize)
        self.dropped = 0
        self._closed = threading.Event()
        self._thread: threading.Thread | None = None

    def _offer(self, env: Envelope) -> None:
        while True:
            try:
                self._buffer.put_nowait(env)
                return
            except queue.Full:
                try:
                    self._buffer.get_nowait()
                    self.dropped += 1
                    if self.dropped == 1 or self.dropped % 100 == 0:
                        log.warning(
                            "subscriber on %r lagging: %d message(s) dropped",
                            self.topic, self.dropped,
                        )
                except queue.Empty:
                    pass

    def get(self, timeout: float | None = None) -> Envelope | None:
        """Next message, or None on timeout / after close."""
        if self._closed.is_set() and self._buffer.empty():
            return None
        try:
            env = self._buffer.get(timeout=timeout)
        except queue.Empty:
            return None
        return env if env is not _SENTINEL else None

    def _run(self, callback) -> None:
        while True:
            env = self._buffer.get()
            if env is _SENTINEL:
                return
            try:
                callback(env)
            except Exception:
                log.exception("subscriber callback on %r failed", self.topic)

    def close(self) -> None:
        if self._closed.is_set():
            return
        self._closed.set()
        self._bus._drop_subscription(self)
        self._offer(_SENTINEL)
        if self._thread is not None and self._thread is not threading.current_thread():
            self._thread.join(timeout=5)


_SENTINEL = Envelope(topic="", payload={})


class MessageBus:
    def __init__(self, max_workers: int = 8, buffer_size: int = DEFAULT_BUFFER):
        self._handlers: dict[str, object] = {}
        self._subs: dict[str, list[Subscription]] = {}
        self._lock = threading.RLock()
        self._pool = ThreadPoolExecutor(
            max_workers=max_workers, thread_name_prefix="bus")
        self._buffer_size = buffer_size
        self._closed = False

    # ------------------------------------------------------------------
    # request/reply

    def register(self, queue_name: str, handler) -> None:
        """Install the handler for a queue, replacing any previous one."""
        with self._lock:
            self._handlers[queue_name] = handler

    def unregister(self, queue_name: str) -> None:
        with self._lock:
            self._handlers.pop(queue_name, None)

    def request(self, queue_name: str, payload: dict,
                timeout: float | None = 30.0) -> dict:
        """Send a request and wait for its reply.

        Raises :class:`NoHandler` for an unserved queue,
        :class:`BusTimeout` when the reply does not arrive in time, and
        re-raises whatever the handler itself raised.
        """
        with self._lock:
            if self._closed:
                raise NoHandler("bus is closed")
            handler = self._handlers.get(queue_name)
        if handler is None:
            raise NoHandler(f"no handler registered for queue {queue_name!r}")
        env = Envelope(topic=queue_name, payload=payload)
        future = self._pool.submit(handler, env.payload)
        try:
            return future.result(timeout=timeout)
        except FutureTimeout:
            future.cancel()
            raise BusTimeout(
                f"no reply on {queue_name!r} within {timeout}s "
                f"(correlation {env.correlation_id})"
            ) from None

    # ------------------------------------------------------------------
    # pub/sub

    def subscribe(self, topic: str, callback=None,
                  buffer_size: int | None = None) -> Subscription:
        sub = Subscription(self, topic, buffer_size or self._buffer_size)
        with self._lock:
            self._subs.setdefault(topic, []).append(sub)
        if callback is not None:
            sub._thread = threading.Thread(
                target=sub._run, args=(callback,),
                name=f"sub-{topic}", daemon=True)
            sub._thread.start()
        return sub

    def publish(self, topic: str, payload: dict) -> int:
        """Fan a message out to current subscribers; returns how many
        buffers accepted it.  Publishing to nobody is not an error."""
        env = Envelope(topic=topic, payload=payload)
        with self._lock:
            targets = list(self._subs.get(topic, ()))
        for sub in targets:
            sub._offer(env)
        return len(targets)

    def _drop_subscription(self, sub: Subscription) -> None:
        with self._lock:
            subs = self._subs.get(sub.topic)
            if subs and sub in subs:
                subs.remove(sub)

    # ------------------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            all_subs = [s for subs in self._subs.values() for s in subs]
        for sub in all_subs:
            sub.close()
        self._pool.shutdown(wait=True)
