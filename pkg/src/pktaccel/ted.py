"""Tail early dropping (TED).

Each connection's state lives in one LFN table value word::

    bit 63      shunt flag
    bits 32-62  packet counter (saturating)
    bits 0-31   key fingerprint

A packet is dropped if its connection is shunted or if its per-connection
count exceeds ``ted_thr``.  ``housekeeping`` halves the threshold while the
ring reports drops and raises it by one per calm period.  A lost table entry
resets the connection to a fresh state, which errs toward forwarding.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional

from .core import ConnKey, fingerprint32, key64
from .lfn import LfnTable

SHUNT_BIT = 1 << 63
COUNT_MAX = (1 << 31) - 1
FP_MASK = 0xFFFFFFFF

DEFAULT_THR0 = 1024
DEFAULT_MIN = 16
DEFAULT_MAX = 1 << 20
DEFAULT_PERIOD_S = 0.1


class ForwardDecision(enum.Enum):
    FORWARD = "forward"
    DROP_SHUNTED = "drop_shunted"
    DROP_TAIL = "drop_tail"


@dataclass(frozen=True)
class ConnState:
    shunt: bool = False
    packet_rec: int = 0

    def pack(self, fp: int) -> int:
        rec = min(self.packet_rec, COUNT_MAX)
        return (SHUNT_BIT if self.shunt else 0) | (rec << 32) | (fp & FP_MASK)

    @staticmethod
    def unpack(word: int, fp: int) -> Optional["ConnState"]:
        """Decode ``word``; ``None`` if it belongs to another key."""
        if word & FP_MASK != fp:
            return None
        return ConnState(bool(word & SHUNT_BIT), (word >> 32) & COUNT_MAX)


@dataclass
class PeriodRecord:
    period_index: int
    ted_thr: int
    congested: bool
    forwarded: int
    dropped_tail: int
    dropped_shunted: int


def congestion_signal(lsr_drops_delta: int) -> bool:
    return lsr_drops_delta > 0


@dataclass
class TedPolicy:
    """Threshold state and decision counters.

    ``enabled=False`` forwards everything without touching the table, which
    gives the no-TED baseline with the same bookkeeping.
    """

    ted_thr: int = DEFAULT_THR0
    ted_min: int = DEFAULT_MIN
    ted_max: int = DEFAULT_MAX
    enabled: bool = True
    track_tails: bool = False
    forwarded: int = 0
    dropped_tail: int = 0
    dropped_shunted: int = 0
    tails: Counter = field(default_factory=Counter)
    series: List[PeriodRecord] = field(default_factory=list)
    _mark: tuple = (0, 0, 0)

    def __post_init__(self):
        if not (1 <= self.ted_min <= self.ted_max):
            raise ValueError("need 1 <= ted_min <= ted_max")
        if not (self.ted_min <= self.ted_thr <= self.ted_max):
            raise ValueError("ted_thr must lie in [ted_min, ted_max]")

    # -- per packet --------------------------------------------------------

    def on_packet(self, cache: LfnTable, key) -> ForwardDecision:
        """Count one packet of ``key`` (a ConnKey, Packet or raw key) and decide."""
        if not self.enabled:
            self.forwarded += 1
            return ForwardDecision.FORWARD
        k = _key_word(key)
        fp = fingerprint32(k)
        word = cache.get(k)
        st = ConnState.unpack(word, fp) if word is not None else None
        shunt = st.shunt if st else False
        rec = min((st.packet_rec if st else 0) + 1, COUNT_MAX)
        cache.put(k, ConnState(shunt, rec).pack(fp))
        if shunt:
            self.dropped_shunted += 1
            return ForwardDecision.DROP_SHUNTED
        if rec > self.ted_thr:
            self.dropped_tail += 1
            if self.track_tails:
                self.tails[k] += 1
            return ForwardDecision.DROP_TAIL
        self.forwarded += 1
        return ForwardDecision.FORWARD

    def shunt(self, cache: LfnTable, key) -> None:
        if not self.enabled:
            return
        k = _key_word(key)
        fp = fingerprint32(k)
        word = cache.get(k)
        st = ConnState.unpack(word, fp) if word is not None else None
        cache.put(k, ConnState(True, st.packet_rec if st else 0).pack(fp))

    # -- periodic ----------------------------------------------------------

    def housekeeping(self, congested: bool) -> int:
        if congested:
            # ceiling halving reaches ted_min after exactly ceil(log2(thr/min)) steps
            self.ted_thr = max(-(-self.ted_thr // 2), self.ted_min)
        else:
            self.ted_thr = min(self.ted_thr + 1, self.ted_max)
        f, t, s = self._mark
        self.series.append(PeriodRecord(len(self.series), self.ted_thr, bool(congested),
                                        self.forwarded - f, self.dropped_tail - t, self.dropped_shunted - s))
        self._mark = (self.forwarded, self.dropped_tail, self.dropped_shunted)
        return self.ted_thr


def _key_word(key) -> int:
    k = getattr(key, "key", key)
    if isinstance(k, ConnKey) or not isinstance(k, int):
        return key64(k)
    return k


def on_packet(policy: TedPolicy, cache: LfnTable, pkt) -> ForwardDecision:
    return policy.on_packet(cache, pkt)


def shunt(policy: TedPolicy, cache: LfnTable, key) -> None:
    policy.shunt(cache, key)


def housekeeping(policy: TedPolicy, congested: bool) -> int:
    return policy.housekeeping(congested)


def periods_to_floor(thr0: int, ted_min: int) -> int:
    """Congested periods needed to go from ``thr0`` down to ``ted_min``."""
    n = 0
    while thr0 > ted_min:
        thr0 = -(-thr0 // 2)
        n += 1
    return n
