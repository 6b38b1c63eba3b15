"""Lockless bimodal queue (LBQ) for selective packet capture.

One producer (the application thread) and one consumer (the capture thread)
share a bounded ring.  While the consumer sleeps the ring is in DORMANT mode
and the producer evicts the oldest element when full; while the consumer runs
(ACTIVE) the producer waits for free space instead.  The consumer switches
modes with :meth:`Lbq.start_consumer` / :meth:`Lbq.stop_consumer`, using one
of two lock-free protocols:

HANDSHAKE
    ``req``/``ack`` flags; a transition completes only once the producer
    performs an enqueue, so the producer must be continuously active.  A
    producer that stops leaves the consumer spinning in ``start_consumer``
    forever; there is no timeout.
CAS
    a ``trans`` guard taken with compare-and-swap; the consumer flips
    ``state`` without producer cooperation.  Default.

Indices are free-running counters: occupancy is ``offset_p - offset_c`` and
the slot is ``offset % capacity`` with capacity a power of two.
"""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from . import _backend

__all__ = [
    "Variant", "Mode", "Status", "EnqueueOutcome", "EMPTY", "Lbq", "PyLbqCore",
    "capture_burst", "CaptureResult", "stress", "StressReport",
]


class Variant(enum.IntEnum):
    HANDSHAKE = 0
    CAS = 1


class Mode(enum.Enum):
    DORMANT = "dormant"
    ACTIVE = "active"


class Status(enum.Enum):
    STORED = "stored"
    STORED_EVICTED = "stored_evicted"


@dataclass(frozen=True)
class EnqueueOutcome:
    status: Status
    evicted: Any = None


STORED = EnqueueOutcome(Status.STORED)


class _Empty:
    __slots__ = ()

    def __repr__(self):
        return "EMPTY"

    def __bool__(self):
        return False


EMPTY = _Empty()


def _yield():
    time.sleep(0)


class PyLbqCore:
    """Pure-Python ring.

    Attribute loads and stores are atomic under the interpreter lock; Python
    exposes no compare-and-swap, so :meth:`_cas` emulates the instruction
    with a lock held only for the compare and the store.
    """

    def __init__(self, capacity: int, variant: int = Variant.CAS, spin_limit: int = -1):
        if capacity < 1 or capacity & (capacity - 1):
            raise ValueError("capacity must be a power of two")
        if variant not in (Variant.HANDSHAKE, Variant.CAS):
            raise ValueError("unknown variant")
        self.capacity = capacity
        self._mask = capacity - 1
        self._slots = [None] * capacity
        self._p = 0
        self._c = 0
        self._req = False
        self._ack = False
        self._trans = False
        self._state = False
        self._variant = Variant(variant)
        self._spin_limit = spin_limit
        self._cmode = False
        self._cas_lock = threading.Lock()

    def _cas(self, name: str, expected, desired) -> bool:
        with self._cas_lock:
            if getattr(self, name) == expected:
                setattr(self, name, desired)
                return True
            return False

    def _publish(self, p, h):
        self._slots[p & self._mask] = h
        self._p = p + 1

    def _evict(self):
        c = self._c
        old = self._slots[c & self._mask]
        self._slots[c & self._mask] = None
        self._c = c + 1
        return old

    def enqueue(self, h):
        p = self._p
        spins = 0
        while True:
            c = self._c
            if self._variant is Variant.HANDSHAKE:
                if not self._req:
                    if self._ack:
                        self._ack = False
                    old = None
                    code = 0
                    if p - self._c == self.capacity:
                        old = self._evict()
                        code = 1
                    self._publish(p, h)
                    return code, old
                if not self._ack:
                    self._ack = True
                if p - c < self.capacity:
                    self._publish(p, h)
                    return 0, None
            else:
                if p - c < self.capacity:
                    self._publish(p, h)
                    return 0, None
                if not self._state:
                    if self._cas("_trans", False, True):
                        try:
                            if not self._state:
                                old = None
                                code = 0
                                if p - self._c == self.capacity:
                                    old = self._evict()
                                    code = 1
                                self._publish(p, h)
                                return code, old
                        finally:
                            self._trans = False
                    _yield()
                    continue
            spins += 1
            if 0 <= self._spin_limit < spins:
                c = self._c
                old = self._slots[c & self._mask]
                if self._cas("_c", c, c + 1):
                    self._publish(p, h)
                    return 1, old
            _yield()

    def dequeue(self):
        while True:
            c = self._c
            if self._p == c:
                return False, None
            v = self._slots[c & self._mask]
            if self._spin_limit >= 0:
                if self._cas("_c", c, c + 1):
                    return True, v
            else:
                self._c = c + 1
                return True, v

    def start_consumer(self):
        if self._cmode:
            return
        if self._variant is Variant.HANDSHAKE:
            self._req = True
            while not self._ack:
                _yield()
        else:
            while not self._cas("_trans", False, True):
                _yield()
            self._state = True
            self._trans = False
        self._cmode = True

    def stop_consumer(self):
        if not self._cmode:
            return
        if self._variant is Variant.HANDSHAKE:
            self._req = False
            while self._ack:
                _yield()
        else:
            while not self._cas("_trans", False, True):
                _yield()
            self._state = False
            self._trans = False
        self._cmode = False

    @property
    def active(self) -> bool:
        return self._cmode

    @property
    def occupancy(self) -> int:
        return self._p - self._c

    @property
    def offsets(self):
        return self._p, self._c


class Lbq:
    """Bimodal ring facade over the compiled or pure-Python core.

    The compiled core stores ``int64`` packet handles; the Python core
    accepts any object.  ``spin_limit`` bounds how long an ACTIVE-mode
    producer waits on a full ring before evicting the oldest element anyway
    (``None`` waits indefinitely).  ``debug=True`` rejects enqueues from a
    second producer thread.
    """

    def __init__(self, capacity: int, variant: Variant = Variant.CAS, spin_limit: Optional[int] = None,
                 backend: Optional[str] = None, debug: bool = False):
        backend = backend or _backend.name()
        limit = -1 if spin_limit is None else int(spin_limit)
        if backend == "compiled":
            if not _backend.COMPILED:
                raise RuntimeError("compiled backend not available")
            self._core = _backend.speedups.LbqCore(capacity, int(variant), limit)
        elif backend == "python":
            self._core = PyLbqCore(capacity, int(variant), limit)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.capacity = capacity
        self.variant = Variant(variant)
        self._debug = debug
        self._producer = None

    def enqueue(self, pkt) -> EnqueueOutcome:
        if self._debug:
            me = threading.get_ident()
            if self._producer is None:
                self._producer = me
            elif self._producer != me:
                raise RuntimeError("second producer thread detected")
        code, old = self._core.enqueue(pkt)
        if code:
            return EnqueueOutcome(Status.STORED_EVICTED, old)
        return STORED

    def dequeue(self):
        ok, v = self._core.dequeue()
        return v if ok else EMPTY

    def start_consumer(self) -> None:
        self._core.start_consumer()

    def stop_consumer(self) -> None:
        self._core.stop_consumer()

    @property
    def mode(self) -> Mode:
        return Mode.ACTIVE if self._core.active else Mode.DORMANT

    @property
    def occupancy(self) -> int:
        return self._core.occupancy

    def __len__(self):
        return self._core.occupancy

    @property
    def core(self):
        return self._core


@dataclass
class CaptureResult:
    captured: int
    error: Optional[BaseException] = None


def capture_burst(q: Lbq, n: int, sink: Callable[[Any], None]) -> CaptureResult:
    """Wake the consumer, move up to ``n`` oldest packets into ``sink``, sleep again."""
    q.start_consumer()
    got = 0
    err = None
    try:
        while got < n:
            v = q.dequeue()
            if v is EMPTY:
                break
            try:
                sink(v)
            except Exception as exc:  # sink failures are reported, not raised
                err = exc
                break
            got += 1
    finally:
        q.stop_consumer()
    return CaptureResult(got, err)


# ---------------------------------------------------------------------------
# Two-thread stress harness
# ---------------------------------------------------------------------------

@dataclass
class StressReport:
    variant: str
    backend: str
    enqueued: int
    consumed: int
    evicted: int
    resident: int
    toggles: int
    seconds: float
    conserved: bool
    fifo_consumed: bool
    fifo_evicted: bool

    @property
    def ok(self) -> bool:
        return self.conserved and self.fifo_consumed and self.fifo_evicted


def _verify(enqueued, consumed, evicted, resident):
    allv = np.concatenate([consumed, evicted, resident])
    conserved = len(allv) == enqueued and np.array_equal(np.sort(allv), np.arange(enqueued))
    fifo_c = bool(np.all(np.diff(consumed) > 0)) if len(consumed) > 1 else True
    fifo_e = bool(np.all(np.diff(evicted) > 0)) if len(evicted) > 1 else True
    return bool(conserved), fifo_c, fifo_e


def stress(packets: int, toggles: int, variant: Variant = Variant.CAS, capacity: int = 1024,
           burst: Optional[int] = None, backend: Optional[str] = None, timeout: float = 600.0) -> StressReport:
    """Run one producer against a consumer that wakes ``toggles`` times.

    Packet handles are the integers ``0..enqueued-1``.  Wake-ups are spaced by
    producer progress; each drains ``burst`` packets (default two ring-fulls,
    so the producer also hits the ACTIVE-mode full path).  Under HANDSHAKE
    the producer keeps producing past ``packets`` until the consumer has
    finished its transitions.
    """
    backend = backend or _backend.name()
    burst = burst if burst is not None else 2 * capacity
    q = Lbq(capacity, variant, backend=backend)
    # extra production room for handshake completion
    ctl = np.zeros(2, dtype=np.int64)
    res = {}

    if backend == "compiled":
        sp = _backend.speedups
        room = packets * 2 + 4 * capacity
        evicted = np.zeros(room, dtype=np.int64)
        consumed = np.zeros(room, dtype=np.int64)

        def producer():
            res["p"] = sp.lbq_produce(q.core, packets, evicted, ctl)

        def consumer():
            res["c"] = sp.lbq_consume_toggling(q.core, packets, toggles, burst, consumed, ctl)
    else:
        core = q.core
        ev_list: list = []
        cons_list: list = []

        def producer():
            i = 0
            while i < packets or not ctl[0]:
                code, old = core.enqueue(i)
                if code:
                    ev_list.append(old)
                i += 1
                if i & 15 == 0:
                    _yield()
            ctl[1] = 1
            res["p"] = (i, len(ev_list))

        def consumer():
            for t in range(toggles):
                threshold = (t + 1) * packets // (toggles + 1)
                while core.offsets[0] < threshold and not ctl[1]:
                    _yield()
                core.start_consumer()
                got = 0
                while got < burst:
                    ok, v = core.dequeue()
                    if ok:
                        cons_list.append(v)
                        got += 1
                    elif ctl[1]:
                        break
                    else:
                        _yield()
                core.stop_consumer()
            ctl[0] = 1
            res["c"] = len(cons_list)

    tp = threading.Thread(target=producer, daemon=True)
    tc = threading.Thread(target=consumer, daemon=True)
    t0 = time.perf_counter()
    tc.start()
    tp.start()
    tp.join(timeout)
    tc.join(max(0.0, timeout - (time.perf_counter() - t0)))
    if tp.is_alive() or tc.is_alive():
        raise TimeoutError("LBQ stress did not finish (deadlock?)")
    dt = time.perf_counter() - t0
    enq, ne = res["p"]
    nc = res["c"]
    resident = []
    while True:
        ok, v = q.core.dequeue()
        if not ok:
            break
        resident.append(v)
    if backend == "compiled":
        cons = consumed[:nc]
        ev = evicted[:ne]
    else:
        cons = np.asarray(cons_list, dtype=np.int64)
        ev = np.asarray(ev_list, dtype=np.int64)
    conserved, fifo_c, fifo_e = _verify(enq, cons, ev, np.asarray(resident, dtype=np.int64))
    return StressReport(q.variant.name, backend, int(enq), int(nc), int(ne), len(resident), toggles, dt,
                        conserved, fifo_c, fifo_e)
