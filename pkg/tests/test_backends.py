"""The compiled kernels and the pure-Python fallback must agree."""

import os
import random
import subprocess
import sys

import numpy as np
import pytest

from pktaccel import _backend
from pktaccel.lbq import Lbq, Variant
from pktaccel.lfn import LfnTable
from pktaccel.mrpq import PyMrpq

needs_compiled = pytest.mark.skipif(not _backend.COMPILED, reason="compiled extension not built")


def test_pure_env_forces_fallback():
    env = dict(os.environ, PKTACCEL_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from pktaccel import _backend, mrpq; "
                          "print(_backend.name(), mrpq.Mrpq is mrpq.PyMrpq)"],
                         capture_output=True, text=True, env=env, check=True).stdout.split()
    assert out == ["python", "True"]


@needs_compiled
def test_lfn_tables_agree():
    rng = np.random.default_rng(0)
    keys = rng.integers(0, 2**63, 20000, dtype=np.uint64)
    vals = rng.integers(1, 2**63, 20000, dtype=np.uint64)
    a, b = LfnTable(1 << 12, backend="python"), LfnTable(1 << 12, backend="compiled")
    for t in (a, b):
        t.core.put_many(keys, vals)
    for k in keys[::7].tolist():
        assert a.get(k) == b.get(k)
    assert a.occupied() == b.occupied()


@needs_compiled
def test_mrpq_agree():
    from pktaccel._speedups import Mrpq as CMrpq
    rng = random.Random(1)
    a, b = PyMrpq(0.5, 64.0), CMrpq(0.5, 64.0)
    last = 0.0
    for _ in range(20000):
        r = rng.random()
        if r < 0.55:
            p = a.floor_band * 0.5 + rng.random() * 60
            a.insert(p, 1)
            b.insert(p, 1)
        elif r < 0.95:
            ea, eb = a.extract_min(), b.extract_min()
            assert (ea and ea.priority) == (eb and eb.priority)
        else:
            f = last = max(last, a.floor_band * 0.5) + rng.random() * 3
            assert [e.priority for e in a.advance_floor(f)] == [e.priority for e in b.advance_floor(f)]
        assert len(a) == len(b)


@needs_compiled
@pytest.mark.parametrize("variant", list(Variant))
def test_lbq_agree_single_thread(variant):
    a, b = Lbq(8, variant, backend="python"), Lbq(8, variant, backend="compiled")
    out_a, out_b = [], []
    for i in range(100):
        out_a.append(a.enqueue(i))
        out_b.append(b.enqueue(i))
    assert [(o.status, o.evicted) for o in out_a] == [(o.status, o.evicted) for o in out_b]
    assert a.occupancy == b.occupancy == 8
    if variant is Variant.CAS:  # a handshake start needs a live producer
        for q in (a, b):
            q.start_consumer()
        assert [a.dequeue() for _ in range(9)] == [b.dequeue() for _ in range(9)]
