import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import run_band_workload
from pktaccel import _backend
from pktaccel.errors import InvalidHandleError, OutOfHorizonError, QueueFullError
from pktaccel.mrpq import HeapOracle, PyMrpq

IMPLS = [PyMrpq] + ([_backend.speedups.Mrpq] if _backend.COMPILED else [])


@pytest.fixture(params=IMPLS, ids=lambda c: c.__module__.split(".")[-1])
def Q(request):
    return request.param


def test_basic_order(Q):
    q = Q(1.0, 100.0)
    for p in (5.5, 3.2, 9.9, 3.7):
        q.insert(p, p)
    assert q.peek().priority == 3.2
    assert [q.extract_min().priority for _ in range(4)] == [3.2, 3.7, 5.5, 9.9]
    assert q.extract_min() is None and q.peek() is None and len(q) == 0


def test_fifo_within_band(Q):
    q = Q(10.0, 1000.0)
    for i, p in enumerate((7.0, 1.0, 9.0, 3.0)):
        q.insert(p, i)
    # one band [0, 10): insertion order, not priority order
    assert [q.extract_min().payload_id for _ in range(4)] == [0, 1, 2, 3]


def test_extract_by_handle(Q):
    q = Q(1.0, 64.0)
    hs = [q.insert(float(i), i) for i in range(10)]
    e = q.extract(hs[4])
    assert e.payload_id == 4 and len(q) == 9
    with pytest.raises(InvalidHandleError):
        q.extract(hs[4])
    assert [q.extract_min().payload_id for _ in range(9)] == [0, 1, 2, 3, 5, 6, 7, 8, 9]


def test_foreign_handle_rejected(Q):
    a, b = Q(1.0, 8.0), Q(1.0, 8.0)
    h = a.insert(1.0)
    with pytest.raises(InvalidHandleError):
        b.extract(h)


def test_advance_floor_expires_lower_bands(Q):
    q = Q(1.0, 100.0)
    for p in (0.5, 1.2, 1.9, 2.0, 5.0):
        q.insert(p, p)
    out = q.advance_floor(2.5)
    assert [e.priority for e in out] == [0.5, 1.2, 1.9]
    assert [e.priority for e in q.advance_floor(2.5)] == []
    assert q.peek().priority == 2.0
    with pytest.raises(ValueError):
        q.advance_floor(1.0)


def test_insert_below_floor_rejected(Q):
    q = Q(1.0, 16.0)
    q.insert(5.0)
    q.extract_min()
    with pytest.raises(OutOfHorizonError):
        q.insert(4.0)
    q.insert(5.0)


def test_beyond_horizon(Q):
    q = Q(1.0, 16.0)
    q.insert(1.0)
    with pytest.raises(OutOfHorizonError):
        q.insert(17.0)
    q.extract_min()
    # an empty queue re-anchors forward
    q.insert(1000.0, "far")
    assert q.peek().payload_id == "far"


def test_nonfinite_priority(Q):
    q = Q(1.0, 16.0)
    with pytest.raises(OutOfHorizonError):
        q.insert(float("nan"))
    with pytest.raises(OutOfHorizonError):
        q.insert(float("inf"))


def test_max_size(Q):
    q = Q(1.0, 16.0, max_size=2)
    q.insert(1.0)
    q.insert(2.0)
    with pytest.raises(QueueFullError):
        q.insert(3.0)


def test_bad_construction(Q):
    with pytest.raises(ValueError):
        Q(0.0, 10.0)
    with pytest.raises(ValueError):
        Q(1.0, 1.0)


def test_wraparound_many_cycles(Q):
    q = Q(1.0, 8.0)
    t = 0.0
    for i in range(1000):
        q.insert(t + 3.5, i)
        e = q.extract_min()
        assert e.payload_id == i
        t = e.priority


def test_bucket_count_ceil(Q):
    assert Q(0.3, 1.0).bucket_count == 4


def test_growth_past_initial_pool(Q):
    q = Q(1.0, 1024.0)
    for i in range(50_000):
        q.insert(float(i % 1000), i)
    assert len(q) == 50_000
    last = -1
    while len(q):
        b = math.floor(q.extract_min().priority)
        assert b >= last
        last = b


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_band_oracle_random_workloads(seed):
    rng = random.Random(seed)
    for Q in IMPLS:
        for _ in range(20):
            bands = run_band_workload(lambda r, h: Q(r, h), rng)
            assert all(a <= b for a, b in zip(bands, bands[1:]))


@given(st.lists(st.floats(0, 1000, allow_nan=False), min_size=1, max_size=200))
def test_heap_oracle_sorted(ps):
    h = HeapOracle()
    for p in ps:
        h.insert(p)
    out = [h.extract_min().priority for _ in ps]
    assert out == sorted(ps)


def test_heap_oracle_cancel_and_floor():
    h = HeapOracle()
    a = h.insert(1.0, "a")
    h.insert(2.0, "b")
    h.insert(3.0, "c")
    h.extract(a)
    with pytest.raises(InvalidHandleError):
        h.extract(a)
    assert [e.payload_id for e in h.advance_floor(2.5)] == ["b"]
    assert len(h) == 1


@given(st.lists(st.floats(0, 500, allow_nan=False), min_size=1, max_size=100), st.sampled_from([0.5, 1.0, 7.0]))
def test_matches_heap_up_to_resolution(ps, r):
    """Extracted priorities never run ahead of the exact order by a full band."""
    q = PyMrpq(r, 1024.0)
    for p in ps:
        q.insert(p)
    got = [q.extract_min().priority for _ in ps]
    exact = sorted(ps)
    for g, e in zip(got, exact):
        assert math.floor(g / r) == math.floor(e / r)
