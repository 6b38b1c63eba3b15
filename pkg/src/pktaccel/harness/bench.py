"""Micro-benchmarks shared by the CLI and the backend comparison script."""

from __future__ import annotations

import random
import time
from typing import Callable, Optional

import numpy as np

from ..lbq import Variant, stress
from ..lfn import LfnTable
from ..mrpq import HeapOracle, Mrpq, PyMrpq

# timer-style increments: short retransmit/idle timers up to long session timers
TIMER_STEPS = (1.0, 5.0, 30.0, 60.0, 300.0)


def _timer_workload(n: int, ops: int, seed: int):
    rng = random.Random(seed)
    fill = [rng.choice(TIMER_STEPS) + rng.random() for _ in range(n)]
    steps = [rng.choice(TIMER_STEPS) + rng.random() for _ in range(ops)]
    return fill, steps


def hold_ns_per_op(make: Callable[[], object], n: int, ops: int, seed: int = 0, repeats: int = 3) -> float:
    """Mean ns per operation of a hold model with ``n`` resident timers.

    Each step extracts the earliest timer and re-arms one further out, so the
    queue stays at ``n`` entries.  Best of ``repeats`` runs.
    """
    fill, steps = _timer_workload(n, ops, seed)
    best = float("inf")
    for _ in range(repeats):
        q = make()
        ins = q.insert
        ext = q.extract_min
        for p in fill:
            ins(p)
        t0 = time.perf_counter_ns()
        for s in steps:
            e = ext()
            ins(e.priority + s)
        dt = time.perf_counter_ns() - t0
        best = min(best, dt / (2 * ops))
        del q
    return best


def mrpq_scaling(small: int = 10_000, large: int = 1_000_000, ops: int = 200_000, seed: int = 0,
                 impl: str = "default") -> dict:
    """ns/op at two queue sizes for the multiresolution queue and the heap baseline."""
    cls = {"default": Mrpq, "python": PyMrpq}[impl]

    def make_mrpq():
        return cls(1.0, 512.0)

    out = {}
    for name, make in (("mrpq", make_mrpq), ("heap", HeapOracle)):
        a = hold_ns_per_op(make, small, ops, seed)
        b = hold_ns_per_op(make, large, ops, seed)
        out[name] = {"ns_small": a, "ns_large": b, "ratio": b / a}
    out["n_small"] = small
    out["n_large"] = large
    return out


def lfn_throughput(n: int = 1 << 20, ops: int = 1_000_000, backend: Optional[str] = None, seed: int = 0) -> dict:
    """Batch put/get rates (ops/s) on a half-full table."""
    t = LfnTable(n, backend=backend)
    rng = np.random.default_rng(seed)
    keys = rng.integers(0, 2**63, size=ops, dtype=np.uint64)
    vals = np.arange(1, ops + 1, dtype=np.uint64)
    out = np.empty(ops, dtype=np.uint64)
    found = np.empty(ops, dtype=bool)
    t0 = time.perf_counter()
    t.core.put_many(keys, vals)
    t1 = time.perf_counter()
    hits = t.core.get_many(keys, out, found)
    t2 = time.perf_counter()
    # scalar path through the Python facade
    m = min(ops, 100_000)
    t3 = time.perf_counter()
    for k in keys[:m].tolist():
        t.get(k)
    t4 = time.perf_counter()
    return {"backend": t.backend, "put_many_ops": ops / (t1 - t0), "get_many_ops": ops / (t2 - t1),
            "scalar_get_ops": m / (t4 - t3), "hit_frac": hits / ops}


def lbq_throughput(packets: int = 1_000_000, toggles: int = 100, variant: Variant = Variant.CAS,
                   backend: Optional[str] = None) -> dict:
    r = stress(packets, toggles, variant, backend=backend)
    return {"backend": r.backend, "variant": r.variant, "packets_per_s": r.enqueued / r.seconds,
            "ok": r.ok, "consumed": r.consumed, "evicted": r.evicted}
