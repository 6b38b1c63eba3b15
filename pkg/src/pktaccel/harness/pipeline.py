"""Virtual-time pipeline: ring -> LQE loop -> TED -> analysis stub -> capture ring.

Every application thread owns a ring (LSR), a software queue (USQ), a timer
queue and a capture ring.  The connection cache and the TED threshold are
shared.  Packets are spread over threads by connection hash.

The thread loop drains its ring into the USQ (as far as the USQ has room),
takes one packet, and asks TED.  Dropped packets cost nothing; a forwarded
packet occupies the thread for one service time and then runs the analysis
stub: re-arm the connection's inactivity timer, create a connection timer on
first sight, shunt encrypted connections at their third packet, and hand the
packet to the capture ring.
"""

from __future__ import annotations

import heapq
import itertools
import random
import time
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Iterable, List, Optional, Sequence

from .. import ted as ted_mod
from ..core import Packet, hash64
from ..errors import InvariantViolation
from ..lbq import Lbq, Status, Variant, capture_burst
from ..lfn import LfnTable
from ..lqe_sim import service_time_from_table2, service_mean
from ..mrpq import Mrpq

_ARRIVAL, _COMPLETE, _HOUSEKEEP, _CAPTURE = 0, 1, 2, 3
_TIMER_CONN, _TIMER_IDLE = 0, 1


@dataclass
class PipelineConfig:
    lsr_capacity_pkts: int = 4096
    usq_capacity_pkts: int = 8192
    lbq_capacity_pkts: int = 1024
    lbq_variant: str = "cas"
    num_app_threads: int = 20
    service: str = "constant"
    service_time_s: float = 1e-4
    ted_enabled: bool = True
    ted_thr0: int = ted_mod.DEFAULT_THR0
    ted_min: int = ted_mod.DEFAULT_MIN
    ted_max: int = ted_mod.DEFAULT_MAX
    housekeeping_period_s: float = ted_mod.DEFAULT_PERIOD_S
    lfn_slots: int = 1 << 20
    mrpq_resolution_s: float = 1e-3
    mrpq_horizon_s: float = 65.536
    inactivity_timeout_s: float = 1.0
    conn_timeout_s: float = 5.0
    shunt_encrypted: bool = True
    shunt_at_seq: int = 2
    capture_times: Sequence[float] = ()
    capture_bursts: Sequence[int] = ()
    seed: int = 0

    def validate(self) -> None:
        for name in ("lsr_capacity_pkts", "usq_capacity_pkts", "lbq_capacity_pkts", "num_app_threads", "lfn_slots"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lbq_capacity_pkts & (self.lbq_capacity_pkts - 1):
            raise ValueError("lbq_capacity_pkts must be a power of two")
        if self.lbq_variant not in ("cas", "handshake"):
            raise ValueError("lbq_variant must be 'cas' or 'handshake'")
        if self.service not in ("constant", "table2"):
            raise ValueError("service must be 'constant' or 'table2'")
        if not self.service_time_s > 0:
            raise ValueError("service_time_s must be > 0")
        if not (1 <= self.ted_min <= self.ted_thr0 <= self.ted_max):
            raise ValueError("need 1 <= ted_min <= ted_thr0 <= ted_max")
        if not self.housekeeping_period_s > 0:
            raise ValueError("housekeeping_period_s must be > 0")
        if not (0 < self.mrpq_resolution_s < self.mrpq_horizon_s):
            raise ValueError("need 0 < mrpq_resolution_s < mrpq_horizon_s")
        longest = max(self.inactivity_timeout_s, self.conn_timeout_s) + self.housekeeping_period_s
        if longest >= self.mrpq_horizon_s:
            raise ValueError("timer timeouts plus one period must fit in mrpq_horizon_s")
        if min(self.inactivity_timeout_s, self.conn_timeout_s) <= 0:
            raise ValueError("timeouts must be > 0")
        if len(self.capture_times) != len(self.capture_bursts):
            raise ValueError("capture_times and capture_bursts must have equal length")
        if any(b < 0 for b in self.capture_bursts) or any(t < 0 for t in self.capture_times):
            raise ValueError("capture times and bursts must be non-negative")

    @property
    def capacity_pps(self) -> float:
        """Aggregate service capacity of all application threads."""
        return self.num_app_threads / self.service_time_s

    def as_dict(self):
        d = asdict(self)
        d["capture_times"] = list(self.capture_times)
        d["capture_bursts"] = list(self.capture_bursts)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown pipeline parameters: {sorted(extra)}")
        d = dict(d)
        for k in ("capture_times", "capture_bursts"):
            if k in d and isinstance(d[k], str):
                d[k] = [x for x in d[k].split(",") if x.strip()]
        d["capture_times"] = tuple(float(x) for x in d.get("capture_times", ()))
        d["capture_bursts"] = tuple(int(x) for x in d.get("capture_bursts", ()))
        return cls(**d)


COUNTER_FIELDS = (
    "arrived", "lsr_drops", "ted_forwarded", "ted_dropped_tail", "ted_dropped_shunted", "processed",
    "in_flight", "timers_created", "timers_expired", "timers_cancelled", "timers_pending",
    "captured_pkts", "lbq_evicted", "shunts", "connections", "front_segments_processed",
    "final_ted_thr", "virtual_end_s",
)


@dataclass
class RunReport:
    arrived: int = 0
    lsr_drops: int = 0
    ted_forwarded: int = 0
    ted_dropped_tail: int = 0
    ted_dropped_shunted: int = 0
    processed: int = 0
    in_flight: int = 0
    timers_created: int = 0
    timers_expired: int = 0
    timers_cancelled: int = 0
    timers_pending: int = 0
    captured_pkts: int = 0
    lbq_evicted: int = 0
    shunts: int = 0
    connections: int = 0
    front_segments_processed: int = 0
    final_ted_thr: int = 0
    virtual_end_s: float = 0.0
    ted_thr_series: List[dict] = field(default_factory=list)
    wall_s: Optional[float] = None

    def counters(self) -> dict:
        return {k: getattr(self, k) for k in COUNTER_FIELDS}

    def check(self) -> None:
        """Raise :class:`InvariantViolation` if the stage counters do not telescope."""
        drops = self.lsr_drops + self.ted_dropped_tail + self.ted_dropped_shunted
        if self.arrived != drops + self.processed + self.in_flight:
            raise InvariantViolation(
                f"arrived {self.arrived} != drops {drops} + processed {self.processed} + in_flight {self.in_flight}")
        if self.timers_created != self.timers_expired + self.timers_cancelled + self.timers_pending:
            raise InvariantViolation("timer counters do not balance")
        if self.ted_forwarded < self.processed:
            raise InvariantViolation("more packets processed than forwarded")


class _Thread:
    __slots__ = ("lsr", "usq", "busy", "current", "timers", "capture", "idle_h", "conn_h")

    def __init__(self, cfg: PipelineConfig, variant: Variant):
        self.lsr = deque()
        self.usq = deque()
        self.busy = False
        self.current = -1
        self.timers = Mrpq(cfg.mrpq_resolution_s, cfg.mrpq_horizon_s)
        self.capture = Lbq(cfg.lbq_capacity_pkts, variant)
        self.idle_h: Dict[int, object] = {}
        self.conn_h: Dict[int, object] = {}


def _ns(t: float) -> int:
    return int(round(t * 1e9))


def run_pipeline(cfg: PipelineConfig, trace: Iterable[Packet], sink=None) -> RunReport:
    """Replay ``trace`` through the pipeline; ``sink`` receives captured packet indices."""
    cfg.validate()
    wall0 = time.perf_counter()
    pkts: List[Packet] = list(trace)
    n = len(pkts)
    nthreads = cfg.num_app_threads
    words = [0] * n
    owner = [0] * n
    totals: Dict[int, int] = {}
    for i, p in enumerate(pkts):
        w = hash64(p.key)
        words[i] = w
        owner[i] = w % nthreads
        totals[w] = totals.get(w, 0) + 1

    rep = RunReport(arrived=0, connections=len(totals))
    cache = LfnTable(cfg.lfn_slots)
    policy = ted_mod.TedPolicy(cfg.ted_thr0, cfg.ted_min, cfg.ted_max, enabled=cfg.ted_enabled)
    variant = Variant.CAS if cfg.lbq_variant == "cas" else Variant.HANDSHAKE
    threads = [_Thread(cfg, variant) for _ in range(nthreads)]
    front_len = cfg.ted_min
    front_seen: Dict[int, int] = {}

    rng = random.Random(cfg.seed)
    if cfg.service == "table2":
        scale = cfg.service_time_s / service_mean()

        def service_time():
            return service_time_from_table2(rng) * scale
    else:
        st = cfg.service_time_s

        def service_time():
            return st

    heap: list = []
    seq = itertools.count()

    def push(t, cls, arg=None):
        heapq.heappush(heap, (_ns(t), cls, next(seq), t, arg))

    usq_cap = cfg.usq_capacity_pkts
    lsr_cap = cfg.lsr_capacity_pkts
    forward = ted_mod.ForwardDecision.FORWARD

    def serve(th: _Thread, now: float) -> None:
        lsr, usq = th.lsr, th.usq
        while True:
            while lsr and len(usq) < usq_cap:
                usq.append(lsr.popleft())
            if not usq:
                th.busy = False
                return
            idx = usq.popleft()
            if policy.on_packet(cache, words[idx]) is forward:
                th.busy = True
                th.current = idx
                push(now + service_time(), _COMPLETE, th)
                return

    def analyse(th: _Thread, idx: int, now: float) -> None:
        p = pkts[idx]
        k = words[idx]
        if cfg.shunt_encrypted and p.encrypted and p.seq_in_conn == cfg.shunt_at_seq:
            policy.shunt(cache, k)
            rep.shunts += 1
        if p.seq_in_conn < front_len:
            front_seen[k] = front_seen.get(k, 0) + 1
        q = th.timers
        if k not in th.conn_h:
            th.conn_h[k] = q.insert(now + cfg.conn_timeout_s, (_TIMER_CONN, k))
            rep.timers_created += 1
        h = th.idle_h.get(k)
        if h is not None:
            q.extract(h)
            rep.timers_cancelled += 1
        th.idle_h[k] = q.insert(now + cfg.inactivity_timeout_s, (_TIMER_IDLE, k))
        rep.timers_created += 1
        out = th.capture.enqueue(idx)
        if out.status is Status.STORED_EVICTED:
            rep.lbq_evicted += 1

    def work_left() -> bool:
        return any(th.busy or th.lsr or th.usq for th in threads)

    last_drops = 0
    push(cfg.housekeeping_period_s, _HOUSEKEEP, 1)
    for t, b in zip(cfg.capture_times, cfg.capture_bursts):
        push(t, _CAPTURE, b)
    captured: List[int] = []
    sink = sink if sink is not None else captured.append

    i = 0
    now = 0.0
    next_ns = _ns(pkts[0].ts) if n else None
    while True:
        if heap and (next_ns is None or heap[0][0] < next_ns):
            _, cls, _, now, arg = heapq.heappop(heap)
            if cls == _COMPLETE:
                th = arg
                rep.processed += 1
                analyse(th, th.current, now)
                serve(th, now)
            elif cls == _HOUSEKEEP:
                drops = rep.lsr_drops - last_drops
                last_drops = rep.lsr_drops
                if policy.enabled:
                    policy.housekeeping(ted_mod.congestion_signal(drops))
                else:
                    policy.series.append(ted_mod.PeriodRecord(len(policy.series), policy.ted_thr, drops > 0,
                                                              0, 0, 0))
                for th in threads:
                    for e in th.timers.advance_floor(now):
                        kind, k = e.payload_id
                        rep.timers_expired += 1
                        if kind == _TIMER_CONN:
                            del th.conn_h[k]
                        else:
                            del th.idle_h[k]
                if i < n or work_left():
                    push(cfg.housekeeping_period_s * (arg + 1), _HOUSEKEEP, arg + 1)
            else:
                for th in threads:
                    res = capture_burst(th.capture, arg, sink)
                    rep.captured_pkts += res.captured
        elif next_ns is not None:
            p = pkts[i]
            now = p.ts
            rep.arrived += 1
            th = threads[owner[i]]
            if len(th.lsr) >= lsr_cap:
                rep.lsr_drops += 1
            else:
                th.lsr.append(i)
                if not th.busy:
                    serve(th, now)
            i += 1
            next_ns = _ns(pkts[i].ts) if i < n else None
        else:
            break

    rep.ted_forwarded = policy.forwarded
    rep.ted_dropped_tail = policy.dropped_tail
    rep.ted_dropped_shunted = policy.dropped_shunted
    rep.in_flight = sum(len(th.lsr) + len(th.usq) + (1 if th.busy else 0) for th in threads)
    rep.timers_pending = sum(len(th.timers) for th in threads)
    rep.final_ted_thr = policy.ted_thr
    rep.virtual_end_s = round(now, 9)
    rep.front_segments_processed = sum(1 for k, c in front_seen.items() if c >= min(front_len, totals[k]))
    rep.ted_thr_series = [asdict(r) for r in policy.series]
    rep.wall_s = time.perf_counter() - wall0
    rep.check()
    return rep
