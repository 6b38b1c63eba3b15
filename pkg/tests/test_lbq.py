import threading

import pytest
from hypothesis import given, settings, strategies as st

from pktaccel.lbq import EMPTY, Lbq, Mode, PyLbqCore, Status, Variant, capture_burst, stress

VARIANTS = [Variant.CAS, Variant.HANDSHAKE]


def test_capacity_power_of_two(backend):
    with pytest.raises(ValueError):
        Lbq(3, backend=backend)
    with pytest.raises(ValueError):
        Lbq(0, backend=backend)


@pytest.mark.parametrize("variant", VARIANTS)
def test_dormant_evicts_oldest(backend, variant):
    q = Lbq(4, variant, backend=backend)
    outs = [q.enqueue(i) for i in range(6)]
    assert [o.status for o in outs[:4]] == [Status.STORED] * 4
    assert outs[4].status is Status.STORED_EVICTED and outs[4].evicted == 0
    assert outs[5].evicted == 1
    assert len(q) == 4 and q.mode is Mode.DORMANT
    assert [q.dequeue() for _ in range(5)] == [2, 3, 4, 5, EMPTY]


def test_empty_dequeue(backend):
    q = Lbq(2, backend=backend)
    assert q.dequeue() is EMPTY
    assert not EMPTY


@pytest.mark.parametrize("variant", VARIANTS)
def test_capture_burst_takes_oldest(backend, variant):
    q = Lbq(8, variant, backend=backend)
    for i in range(20):
        q.enqueue(i)
    got = []
    if variant is Variant.HANDSHAKE:
        # the handshake needs a live producer to acknowledge the transitions
        stop = threading.Event()

        def produce():
            i = 20
            while not stop.is_set():
                q.enqueue(i)
                i += 1

        t = threading.Thread(target=produce)
        t.start()
        res = capture_burst(q, 3, got.append)
        stop.set()
        t.join()
        assert res.captured == 3 and got == sorted(got)
    else:
        res = capture_burst(q, 3, got.append)
        assert res.captured == 3 and got == [12, 13, 14]
    assert q.mode is Mode.DORMANT


def test_capture_burst_sink_error_still_stops(backend):
    q = Lbq(4, backend=backend)
    for i in range(4):
        q.enqueue(i)

    def bad(_):
        raise OSError("disk full")

    res = capture_burst(q, 4, bad)
    assert res.captured == 0 and isinstance(res.error, OSError)
    assert q.mode is Mode.DORMANT


def test_capture_burst_fewer_available(backend):
    q = Lbq(4, backend=backend)
    q.enqueue(7)
    got = []
    assert capture_burst(q, 10, got.append).captured == 1 and got == [7]


def test_start_stop_idempotent(backend):
    q = Lbq(4, backend=backend)
    q.start_consumer()
    q.start_consumer()
    assert q.mode is Mode.ACTIVE
    q.stop_consumer()
    q.stop_consumer()
    assert q.mode is Mode.DORMANT


def test_spin_limit_evicts_when_active(backend):
    q = Lbq(2, spin_limit=10, backend=backend)
    q.enqueue(1)
    q.enqueue(2)
    q.start_consumer()
    out = q.enqueue(3)
    assert out.status is Status.STORED_EVICTED and out.evicted == 1
    assert q.dequeue() == 2 and q.dequeue() == 3
    q.stop_consumer()


def test_debug_rejects_second_producer():
    q = Lbq(4, backend="python", debug=True)
    q.enqueue(1)
    err = []

    def other():
        try:
            q.enqueue(2)
        except RuntimeError as e:
            err.append(e)

    t = threading.Thread(target=other)
    t.start()
    t.join()
    assert err


def test_python_core_accepts_objects():
    q = Lbq(2, backend="python")
    q.enqueue({"pkt": 1})
    assert q.dequeue() == {"pkt": 1}


def test_unknown_backend():
    with pytest.raises(ValueError):
        Lbq(2, backend="gpu")


@settings(max_examples=80, deadline=None)
@given(st.lists(st.one_of(st.just("deq"), st.integers(0, 1000)), max_size=60), st.sampled_from([1, 2, 4, 8]))
def test_dormant_single_thread_model(ops, cap):
    """Sequential DORMANT behaviour equals a bounded deque that drops its head."""
    from collections import deque
    core = PyLbqCore(cap)
    model = deque()
    for op in ops:
        if op == "deq":
            ok, v = core.dequeue()
            assert (ok, v) == ((True, model.popleft()) if model else (False, None))
        else:
            code, old = core.enqueue(op)
            if len(model) == cap:
                assert (code, old) == (1, model.popleft())
            else:
                assert code == 0
            model.append(op)
        assert core.occupancy == len(model)


@pytest.mark.parametrize("variant", VARIANTS)
def test_stress_small(backend, variant):
    n, toggles = (200_000, 100) if backend == "compiled" else (10_000, 10)
    r = stress(n, toggles, variant, capacity=64, backend=backend, timeout=120)
    assert r.ok, r
    assert r.consumed > 0


def test_stress_small_ring_heavy_eviction(backend):
    r = stress(5000, 5, Variant.CAS, capacity=2, burst=3, backend=backend, timeout=120)
    assert r.ok
