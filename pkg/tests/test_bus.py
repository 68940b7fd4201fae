import threading
import time

import pytest

from castorette.bus import MessageBus, Subscription
from castorette.errors import BusTimeout, NoHandler


@pytest.fixture
def bus():
    b = MessageBus(max_workers=4)
    yield b
    b.close()


def test_request_reply(bus):
    bus.register("echo", lambda payload: {"got": payload["x"] * 2})
    assert bus.request("echo", {"x": 21}) == {"got": 42}


def test_no_handler(bus):
    with pytest.raises(NoHandler):
        bus.request("nowhere", {})


def test_handler_replacement(bus):
    bus.register("q", lambda p: {"v": 1})
    bus.register("q", lambda p: {"v": 2})
    assert bus.request("q", {}) == {"v": 2}
    bus.unregister("q")
    with pytest.raises(NoHandler):
        bus.request("q", {})


def test_handler_exception_propagates(bus):
    class Boom(RuntimeError):
        pass

    def handler(payload):
        raise Boom("handler blew up")

    bus.register("boom", handler)
    with pytest.raises(Boom, match="handler blew up"):
        bus.request("boom", {})


def test_request_timeout(bus):
    release = threading.Event()

    def slow(payload):
        release.wait(5)
        return {}

    bus.register("slow", slow)
    t0 = time.monotonic()
    with pytest.raises(BusTimeout):
        bus.request("slow", {}, timeout=0.1)
    assert time.monotonic() - t0 < 2
    release.set()


def test_concurrent_requests(bus):
    bus.register("sq", lambda p: {"v": p["x"] ** 2})
    results = {}
    errs = []

    def call(i):
        try:
            results[i] = bus.request("sq", {"x": i})["v"]
        except Exception as exc:  # noqa: BLE001
            errs.append(exc)

    threads = [threading.Thread(target=call, args=(i,)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errs
    assert results == {i: i ** 2 for i in range(16)}


def test_pubsub_fanout(bus):
    a = bus.subscribe("jobs")
    b = bus.subscribe("jobs")
    delivered = bus.publish("jobs", {"n": 1})
    assert delivered == 2
    assert a.get(timeout=1).payload == {"n": 1}
    assert b.get(timeout=1).payload == {"n": 1}


def test_publish_without_subscribers_ok(bus):
    assert bus.publish("silence", {"n": 1}) == 0


def test_subscription_preserves_order(bus):
    sub = bus.subscribe("seq")
    for i in range(10):
        bus.publish("seq", {"i": i})
    got = [sub.get(timeout=1).payload["i"] for i in range(10)]
    assert got == list(range(10))


def test_slow_subscriber_drops_oldest(bus):
    sub = bus.subscribe("firehose", buffer_size=4)
    for i in range(10):
        bus.publish("firehose", {"i": i})
    kept = []
    while True:
        env = sub.get(timeout=0.05)
        if env is None:
            break
        kept.append(env.payload["i"])
    assert kept == [6, 7, 8, 9]
    assert sub.dropped == 6


def test_slow_subscriber_does_not_affect_others(bus):
    slow = bus.subscribe("t", buffer_size=2)
    fast = bus.subscribe("t", buffer_size=100)
    for i in range(20):
        bus.publish("t", {"i": i})
    got = [fast.get(timeout=0.5).payload["i"] for i in range(20)]
    assert got == list(range(20))
    assert slow.dropped == 18


def test_callback_subscription(bus):
    seen = []
    done = threading.Event()

    def cb(env):
        seen.append(env.payload["i"])
        if len(seen) == 5:
            done.set()

    sub = bus.subscribe("cb", callback=cb)
    for i in range(5):
        bus.publish("cb", {"i": i})
    assert done.wait(2)
    assert seen == list(range(5))
    sub.close()


def test_closed_subscription_stops_receiving(bus):
    sub = bus.subscribe("x")
    bus.publish("x", {"i": 0})
    assert sub.get(timeout=1).payload == {"i": 0}
    sub.close()
    assert bus.publish("x", {"i": 1}) == 0
    assert sub.get(timeout=0.05) is None


def test_get_timeout_returns_none(bus):
    sub = bus.subscribe("empty")
    assert sub.get(timeout=0.05) is None


def test_envelope_metadata(bus):
    sub = bus.subscribe("meta")
    bus.publish("meta", {"a": 1})
    env = sub.get(timeout=1)
    assert env.topic == "meta"
    assert len(env.correlation_id) == 32
    assert env.sent_at <= time.time()


def test_closed_bus_rejects_requests():
    bus = MessageBus()
    bus.register("q", lambda p: {})
    bus.close()
    with pytest.raises(NoHandler):
        bus.request("q", {})
