"""Discrete-event model of the dispatcher-thread (DT) and long-queue-emulation (LQE) packet paths.

Arrivals come from a deterministic on/off source: rate ``lambda_max`` for
``burst_on_s`` seconds, then a lower rate for ``burst_off_s`` seconds chosen
so the long-run mean is ``lambda_avg``.  Arrivals are evenly spaced within a
phase, so no window of length ``w`` ever holds more than ``ceil(w * lambda_max)``
packets.

DT
    A dispatcher with zero cost moves every arrival from the ring (LSR) to
    the software queue (USQ) at once; the application thread serves the USQ
    at ``mu_dt``.
LQE
    A single thread drains the whole LSR into the USQ, serves exactly one
    packet at ``mu_lqe``, and repeats.  An idle thread picks up an arrival
    immediately.

Simultaneous events resolve arrivals first.  Event times are compared at
nanosecond granularity so float noise cannot reorder an exact tie.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import json
import math
import random
from dataclasses import asdict, dataclass
from typing import Iterator, Optional, Union

import numpy as np

from .mrpq import Mrpq

# Per-packet processing time histogram: band edges (s) and packet counts.
SERVICE_EDGES = (0.0, 10e-6, 100e-6, 1e-3, 10e-3, 100e-3)
SERVICE_COUNTS = (305, 405_493, 3_387_846, 127, 7)
SERVICE_TOTAL = 3_793_778
# log-uniform sampling needs a positive lower edge for the first band
SERVICE_FLOOR_S = 1e-6

# average packet size of the reference traffic mix, bytes
AVG_PKT_BYTES = 510.25


class Model(enum.Enum):
    DT = "DT"
    LQE = "LQE"


class Case(enum.Enum):
    CASE_2 = "CASE_2"
    CASE_3 = "CASE_3"
    CASE_4 = "CASE_4"


@dataclass(frozen=True)
class ModelChoice:
    choice: Model
    case_id: Case

    def as_dict(self):
        return {"choice": self.choice.value, "case_id": self.case_id.value}


@dataclass(frozen=True)
class SimParams:
    lambda_avg: float
    lambda_max: float
    mu_dt: float
    mu_lqe: float
    s_lsr: int
    usq_capacity: Optional[int] = None
    burst_on_s: float = 1.0
    burst_off_s: float = 0.0
    duration_s: float = 10.0
    seed: int = 0
    service: str = "constant"

    def validate(self) -> None:
        if not (self.lambda_avg >= 0 and self.lambda_max >= self.lambda_avg):
            raise ValueError("need lambda_max >= lambda_avg >= 0")
        if self.lambda_max <= 0:
            raise ValueError("lambda_max must be positive")
        if not (self.mu_lqe > self.mu_dt > 0):
            raise ValueError("need mu_lqe > mu_dt > 0")
        if int(self.s_lsr) != self.s_lsr or self.s_lsr < 1:
            raise ValueError("s_lsr must be an integer >= 1")
        if self.usq_capacity is not None and self.usq_capacity < 1:
            raise ValueError("usq_capacity must be >= 1 or None")
        if self.burst_on_s <= 0 or self.burst_off_s < 0:
            raise ValueError("burst_on_s must be > 0 and burst_off_s >= 0")
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")
        if self.service not in ("constant", "table2"):
            raise ValueError("service must be 'constant' or 'table2'")

    def arrival_profile(self):
        """Return ``(lambda_off, effective_lambda_avg)`` for the on/off source."""
        on, off = self.burst_on_s, self.burst_off_s
        if off == 0:
            return 0.0, self.lambda_max
        lam_off = (self.lambda_avg * (on + off) - self.lambda_max * on) / off
        if lam_off < 0:
            lam_off = 0.0
        return lam_off, (self.lambda_max * on + lam_off * off) / (on + off)

    @classmethod
    def from_dict(cls, d: dict) -> "SimParams":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown parameters: {sorted(extra)}")
        missing = [k for k in ("lambda_avg", "lambda_max", "mu_dt", "mu_lqe", "s_lsr") if k not in d]
        if missing:
            raise ValueError(f"missing parameters: {missing}")
        d = dict(d)
        if d.get("usq_capacity") in ("unbounded", "none", "None"):
            d["usq_capacity"] = None
        return cls(**d)


@dataclass
class SimReport:
    arrived: int = 0
    processed: int = 0
    dropped_lsr: int = 0
    dropped_usq: int = 0
    drop_rate_pps: float = 0.0
    max_usq_depth: int = 0
    max_lsr_depth: int = 0
    in_flight: int = 0
    lambda_avg_effective: float = 0.0

    @property
    def unserved(self) -> int:
        """Packets that arrived but were not processed within the run."""
        return self.arrived - self.processed

    def as_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=False)


def decide_model(params: SimParams) -> ModelChoice:
    """Pick DT or LQE from the ring budget and the LQE service rate."""
    params.validate()
    # s_lsr / lambda_max >= 1 / mu_lqe, kept in multiplicative form
    if params.s_lsr * params.mu_lqe >= params.lambda_max:
        return ModelChoice(Model.LQE, Case.CASE_2)
    if params.lambda_avg >= params.mu_lqe:
        return ModelChoice(Model.LQE, Case.CASE_3)
    return ModelChoice(Model.DT, Case.CASE_4)


# ---------------------------------------------------------------------------
# Service time distribution
# ---------------------------------------------------------------------------

def service_probabilities(counts=SERVICE_COUNTS):
    total = sum(counts)
    return tuple(c / total for c in counts)


def _band_bounds(edges):
    lo = [max(a, SERVICE_FLOOR_S) for a in edges[:-1]]
    return lo, list(edges[1:])


def service_mean(edges=SERVICE_EDGES, counts=SERVICE_COUNTS) -> float:
    """Analytic mean of the log-uniform mixture."""
    lo, hi = _band_bounds(edges)
    probs = service_probabilities(counts)
    return sum(p * (b - a) / math.log(b / a) for p, a, b in zip(probs, lo, hi))


def service_time_from_table2(rng: random.Random, edges=SERVICE_EDGES, counts=SERVICE_COUNTS) -> float:
    """Draw one processing time: band by count, then log-uniform inside the band."""
    lo, hi = _band_bounds(edges)
    i = rng.choices(range(len(counts)), weights=counts)[0]
    a, b = lo[i], hi[i]
    return a * (b / a) ** rng.random()


def sample_service_times(rng: np.random.Generator, size: int, edges=SERVICE_EDGES, counts=SERVICE_COUNTS) -> np.ndarray:
    lo, hi = (np.asarray(x) for x in _band_bounds(edges))
    probs = np.asarray(service_probabilities(counts))
    band = rng.choice(len(counts), size=size, p=probs)
    a, b = lo[band], hi[band]
    return a * (b / a) ** rng.random(size)


# ---------------------------------------------------------------------------
# Event lists
# ---------------------------------------------------------------------------

ARRIVAL = 0
COMPLETE = 1


def _ns(t: float) -> int:
    return int(round(t * 1e9))


class HeapEvents:
    def __init__(self):
        self._h = []
        self._seq = itertools.count()

    def push(self, t: float, kind: int) -> None:
        heapq.heappush(self._h, (_ns(t), kind, next(self._seq), t))

    def pop(self):
        if not self._h:
            return None
        k, kind, _, t = heapq.heappop(self._h)
        return t, kind

    def __len__(self):
        return len(self._h)


class MrpqEvents:
    """Event list on a 1 us multiresolution queue.

    Events of the current microsecond band are pulled out together and
    ordered exactly in a small local heap.  Events further out than the queue
    horizon wait in an overflow heap until the window reaches them.
    """

    RES_NS = 1000.0
    BUCKETS = 1 << 20

    def __init__(self):
        self._q = Mrpq(resolution=self.RES_NS, horizon=self.RES_NS * self.BUCKETS)
        self._local = []
        self._far = []
        self._band = None
        self._seq = itertools.count()

    def _window_end(self) -> int:
        return self._q.floor_band + self._q.bucket_count

    def push(self, t: float, kind: int) -> None:
        k = _ns(t)
        item = (k, kind, next(self._seq), t)
        b = math.floor(k / self.RES_NS)
        n = len(self._q)
        # anything below the queue floor still precedes every queued event
        if (self._band is not None and b <= self._band) or (n and b < self._q.floor_band):
            heapq.heappush(self._local, item)
        elif n and b < self._window_end():
            self._q.insert(float(k), item)
        else:
            heapq.heappush(self._far, item)

    def _refill(self) -> bool:
        while self._far and (len(self._q) == 0 or math.floor(self._far[0][0] / self.RES_NS) < self._window_end()):
            item = heapq.heappop(self._far)
            self._q.insert(float(item[0]), item)
        e = self._q.extract_min()
        if e is None:
            return False
        self._band = self._q.band_of(e.priority)
        heapq.heappush(self._local, e.payload_id)
        while True:
            nxt = self._q.peek()
            if nxt is None or self._q.band_of(nxt.priority) != self._band:
                break
            heapq.heappush(self._local, self._q.extract_min().payload_id)
        return True

    def pop(self):
        if not self._local and not self._refill():
            return None
        k, kind, _, t = heapq.heappop(self._local)
        return t, kind

    def __len__(self):
        return len(self._local) + len(self._q) + len(self._far)


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------

def arrival_times(params: SimParams) -> Iterator[float]:
    """Arrival instants of the on/off source within ``[0, duration_s)``."""
    on, off = params.burst_on_s, params.burst_off_s
    lam_off, _ = params.arrival_profile()
    if params.lambda_avg == 0:
        return
    period = on + off
    end = params.duration_s
    c = 0
    while True:
        start = c * period
        if start >= end:
            return
        for ph_start, length, rate in ((start, on, params.lambda_max), (start + on, off, lam_off)):
            if rate <= 0 or length <= 0:
                continue
            n = math.floor(length * rate + 1e-9)
            inv = 1.0 / rate
            for k in range(1, n + 1):
                t = ph_start + k * inv
                if t >= end:
                    return
                yield t
        c += 1


def simulate(params: SimParams, model: Union[Model, str], event_list: str = "mrpq") -> SimReport:
    """Run one model for ``duration_s`` of virtual time.

    ``drop_rate_pps`` is ``(arrived - processed) / duration_s``: explicit
    drops plus backlog still queued at the end, which in an unstable regime
    grows without bound and is never served.
    """
    params.validate()
    model = Model(model)
    events = MrpqEvents() if event_list == "mrpq" else HeapEvents()
    rng = random.Random(params.seed)
    if params.service == "table2":
        scale = 1.0 / service_mean()
        base_service = 1.0 / (params.mu_lqe if model is Model.LQE else params.mu_dt)

        def service_time():
            return service_time_from_table2(rng) * scale * base_service
    else:
        mu = params.mu_lqe if model is Model.LQE else params.mu_dt
        service_const = 1.0 / mu

        def service_time():
            return service_const

    constant = params.service == "constant"
    rep = SimReport(lambda_avg_effective=params.arrival_profile()[1] if params.lambda_avg > 0 else 0.0)
    s_lsr = int(params.s_lsr)
    usq_cap = params.usq_capacity if params.usq_capacity is not None else math.inf
    lsr = 0
    usq = 0
    busy = False
    busy_start = 0.0
    served_in_busy = 0
    acc_t = 0.0

    arrivals = arrival_times(params)
    nxt = next(arrivals, None)
    if nxt is not None:
        events.push(nxt, ARRIVAL)

    def start_service(now):
        nonlocal busy, busy_start, served_in_busy, acc_t
        if not busy:
            busy = True
            busy_start = now
            served_in_busy = 0
            acc_t = now
        served_in_busy += 1
        if constant:
            # anchor on the busy-period start to avoid drift
            events.push(busy_start + served_in_busy * service_const, COMPLETE)
        else:
            acc_t += service_time()
            events.push(acc_t, COMPLETE)

    def drain():
        nonlocal lsr, usq
        room = usq_cap - usq
        moved = lsr if lsr <= room else int(room)
        rep.dropped_usq += lsr - moved
        usq += moved
        lsr = 0

    lqe = model is Model.LQE
    while True:
        ev = events.pop()
        if ev is None:
            break
        now, kind = ev
        if now > params.duration_s:
            break
        if kind == ARRIVAL:
            rep.arrived += 1
            if lsr >= s_lsr:
                rep.dropped_lsr += 1
            else:
                lsr += 1
                if lsr > rep.max_lsr_depth:
                    rep.max_lsr_depth = lsr
            nxt = next(arrivals, None)
            if nxt is not None:
                events.push(nxt, ARRIVAL)
            if lqe:
                if not busy:
                    drain()
                    if usq:
                        usq -= 1
                        start_service(now)
            else:
                drain()
                if not busy and usq:
                    usq -= 1
                    start_service(now)
        else:
            rep.processed += 1
            if lqe:
                drain()
            if usq:
                usq -= 1
                start_service(now)
            else:
                busy = False
        if usq > rep.max_usq_depth:
            rep.max_usq_depth = usq

    rep.in_flight = lsr + usq + (1 if busy else 0)
    if params.duration_s > 0:
        rep.drop_rate_pps = (rep.arrived - rep.processed) / params.duration_s
    return rep


def total_loss(rep: SimReport) -> int:
    return rep.unserved


def better_model(params: SimParams, event_list: str = "mrpq"):
    """Simulate both models; return ``(winner, dt_report, lqe_report)``. Ties go to LQE."""
    dt = simulate(params, Model.DT, event_list)
    lq = simulate(params, Model.LQE, event_list)
    winner = Model.LQE if total_loss(lq) <= total_loss(dt) else Model.DT
    return winner, dt, lq


def solarflare_params(lambda_max_bps: float = 10e9, mu_lqe: float = 11.0, mu_dt: float = 10.0,
                      ring_bytes: int = 136_314_880, avg_pkt_bytes: float = AVG_PKT_BYTES, **kw) -> SimParams:
    """Reference NIC scenario with ring and rate converted to packets."""
    s_lsr = int(ring_bytes // avg_pkt_bytes)
    lam_max = lambda_max_bps / (avg_pkt_bytes * 8)
    kw.setdefault("lambda_avg", lam_max / 10)
    kw.setdefault("burst_on_s", 1.0)
    kw.setdefault("burst_off_s", 9.0)
    return SimParams(lambda_max=lam_max, mu_dt=mu_dt, mu_lqe=mu_lqe, s_lsr=s_lsr, **kw)
