"""Multiresolution priority queue for timer management.

Priorities are grouped into bands of width ``resolution``; ordering is exact
between bands and FIFO inside a band.  Bands live in a circular array of
``ceil(horizon / resolution)`` buckets, each an intrusive doubly linked list,
and a two-level occupancy bitmap finds the lowest non-empty bucket in a
bounded number of word operations.  Insert, peek, extract-min and extract by
handle therefore run in constant time regardless of queue size.

``Mrpq`` is the compiled implementation when the extension is built and
:class:`PyMrpq` otherwise.  :class:`HeapOracle` is a binary heap with the same
surface, used as ground truth and as the cost baseline.
"""

from __future__ import annotations

import heapq
import itertools
import math
from typing import Any, List, Optional

from . import _backend
from .errors import InvalidHandleError, OutOfHorizonError, QueueFullError

__all__ = [
    "Mrpq",
    "PyMrpq",
    "HeapOracle",
    "TimerEntry",
    "PyTimerEntry",
    "OutOfHorizonError",
    "QueueFullError",
    "InvalidHandleError",
    "DEFAULT_RESOLUTION",
    "DEFAULT_HORIZON",
]

DEFAULT_RESOLUTION = 1.0
DEFAULT_HORIZON = float(2**16)

_W = 64
_ALL = (1 << _W) - 1


class PyTimerEntry:
    __slots__ = ("priority", "payload_id", "handle")

    def __init__(self, priority: float, payload_id: Any = None, handle: Any = None):
        self.priority = priority
        self.payload_id = payload_id
        self.handle = handle

    def __repr__(self):
        return f"TimerEntry(priority={self.priority!r}, payload_id={self.payload_id!r})"

    def __eq__(self, other):
        if not hasattr(other, "priority"):
            return NotImplemented
        return (self.priority, self.payload_id, self.handle) == (other.priority, other.payload_id, other.handle)

    def __hash__(self):
        return hash((self.priority, id(self.handle)))


class _Node:
    __slots__ = ("priority", "payload", "band", "prev", "next", "owner")


class PyMrpq:
    """Pure-Python multiresolution priority queue (same surface as the compiled one)."""

    def __init__(self, resolution: float = DEFAULT_RESOLUTION, horizon: float = DEFAULT_HORIZON,
                 max_size: Optional[int] = None, origin: float = 0.0):
        if not (resolution > 0) or not math.isfinite(resolution):
            raise ValueError("resolution must be > 0")
        if not (horizon > 0) or not math.isfinite(horizon):
            raise ValueError("horizon must be > 0")
        nb = math.ceil(horizon / resolution)
        if nb < 2:
            raise ValueError("horizon / resolution must give at least 2 buckets")
        if nb > (1 << 30):
            raise ValueError("too many buckets")
        self.resolution = float(resolution)
        self.horizon = float(horizon)
        self.bucket_count = nb
        self._base = math.floor(origin / resolution)
        self._last_floor = -1e308
        self._head: List[Optional[_Node]] = [None] * nb
        self._tail: List[Optional[_Node]] = [None] * nb
        nw0 = (nb + _W - 1) // _W
        self._l0 = [0] * nw0
        self._l1 = [0] * ((nw0 + _W - 1) // _W)
        self._max_size = max_size
        self._size = 0

    def __len__(self):
        return self._size

    @property
    def floor_band(self) -> int:
        return self._base

    def band_of(self, priority: float) -> int:
        if not math.isfinite(priority):
            raise OutOfHorizonError("priority must be finite")
        return math.floor(priority / self.resolution)

    # bitmap helpers
    def _set(self, s: int) -> None:
        w = s >> 6
        self._l0[w] |= 1 << (s & 63)
        self._l1[w >> 6] |= 1 << (w & 63)

    def _clear(self, s: int) -> None:
        w = s >> 6
        self._l0[w] &= ~(1 << (s & 63))
        if not self._l0[w]:
            self._l1[w >> 6] &= ~(1 << (w & 63))

    def _first_ge(self, s: int) -> int:
        if s >= self.bucket_count:
            return -1
        l0 = self._l0
        w = s >> 6
        bits = l0[w] & (_ALL << (s & 63))
        if bits:
            return (w << 6) + ((bits & -bits).bit_length() - 1)
        w += 1
        if w >= len(l0):
            return -1
        l1 = self._l1
        v = w >> 6
        bits = l1[v] & (_ALL << (w & 63))
        while not bits:
            v += 1
            if v >= len(l1):
                return -1
            bits = l1[v]
        w = (v << 6) + ((bits & -bits).bit_length() - 1)
        bits = l0[w]
        return (w << 6) + ((bits & -bits).bit_length() - 1)

    def _min_slot(self) -> int:
        s = self._first_ge(self._base % self.bucket_count)
        return s if s >= 0 else self._first_ge(0)

    def _unlink(self, node: _Node) -> None:
        s = node.band % self.bucket_count
        p, n = node.prev, node.next
        if p is not None:
            p.next = n
        else:
            self._head[s] = n
        if n is not None:
            n.prev = p
        else:
            self._tail[s] = p
        if self._head[s] is None:
            self._clear(s)

    def _release(self, node: _Node) -> PyTimerEntry:
        node.owner = None
        node.prev = node.next = None
        self._size -= 1
        return PyTimerEntry(node.priority, node.payload, node)

    def insert(self, priority: float, payload_id: Any = None) -> _Node:
        b = self.band_of(priority)
        if self._size == 0 and b >= self._base + self.bucket_count:
            self._base = b
        if b < self._base or b >= self._base + self.bucket_count:
            raise OutOfHorizonError(
                f"priority {priority!r} outside [{self._base * self.resolution!r}, "
                f"{(self._base + self.bucket_count) * self.resolution!r})")
        if self._max_size is not None and self._size >= self._max_size:
            raise QueueFullError("queue at capacity")
        node = _Node()
        node.priority = priority
        node.payload = payload_id
        node.band = b
        node.owner = self
        node.next = None
        s = b % self.bucket_count
        t = self._tail[s]
        node.prev = t
        if t is not None:
            t.next = node
        else:
            self._head[s] = node
            self._set(s)
        self._tail[s] = node
        self._size += 1
        return node

    def peek(self) -> Optional[PyTimerEntry]:
        if not self._size:
            return None
        node = self._head[self._min_slot()]
        return PyTimerEntry(node.priority, node.payload, node)

    def extract_min(self) -> Optional[PyTimerEntry]:
        if not self._size:
            return None
        node = self._head[self._min_slot()]
        self._base = node.band
        self._unlink(node)
        return self._release(node)

    def extract(self, handle: _Node) -> PyTimerEntry:
        if not isinstance(handle, _Node) or handle.owner is not self:
            raise InvalidHandleError(handle)
        self._unlink(handle)
        return self._release(handle)

    def advance_floor(self, new_floor: float) -> List[PyTimerEntry]:
        """Expire every entry in a band strictly below ``band_of(new_floor)``."""
        if new_floor < self._last_floor:
            raise ValueError("floor must not move backwards")
        self._last_floor = new_floor
        fb = self.band_of(new_floor)
        out: List[PyTimerEntry] = []
        if fb <= self._base:
            return out
        while self._size:
            s = self._min_slot()
            node = self._head[s]
            if node.band >= fb:
                break
            self._base = node.band
            while node is not None:
                nxt = node.next
                out.append(self._release(node))
                node = nxt
            self._head[s] = self._tail[s] = None
            self._clear(s)
        self._base = fb
        return out


class HeapOracle:
    """Binary-heap priority queue with exact ordering and lazy cancellation."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()
        self._live: dict = {}

    def __len__(self):
        return len(self._live)

    def insert(self, priority: float, payload_id: Any = None) -> int:
        h = next(self._seq)
        heapq.heappush(self._heap, (priority, h, payload_id))
        self._live[h] = priority
        return h

    def _prune(self) -> None:
        heap = self._heap
        while heap and heap[0][1] not in self._live:
            heapq.heappop(heap)

    def peek(self) -> Optional[PyTimerEntry]:
        self._prune()
        if not self._heap:
            return None
        p, h, payload = self._heap[0]
        return PyTimerEntry(p, payload, h)

    def extract_min(self) -> Optional[PyTimerEntry]:
        self._prune()
        if not self._heap:
            return None
        p, h, payload = heapq.heappop(self._heap)
        del self._live[h]
        return PyTimerEntry(p, payload, h)

    def extract(self, handle: int) -> PyTimerEntry:
        try:
            p = self._live.pop(handle)
        except (KeyError, TypeError):
            raise InvalidHandleError(handle) from None
        return PyTimerEntry(p, None, handle)

    def advance_floor(self, new_floor: float) -> List[PyTimerEntry]:
        out = []
        while True:
            self._prune()
            if not self._heap or self._heap[0][0] >= new_floor:
                return out
            p, h, payload = heapq.heappop(self._heap)
            del self._live[h]
            out.append(PyTimerEntry(p, payload, h))


if _backend.COMPILED:
    Mrpq = _backend.speedups.Mrpq
    TimerEntry = _backend.speedups.TimerEntry
else:
    Mrpq = PyMrpq
    TimerEntry = PyTimerEntry
