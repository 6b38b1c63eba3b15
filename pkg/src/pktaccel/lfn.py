"""Lock-free low-false-negative (LFN) hash table.

Each slot is a pair of machine words ``(value, check)`` where ``check`` is a
64-bit hash of the key concatenated with the value.  ``put`` overwrites its
slot unconditionally with two single-word stores; ``get`` returns the value
only if the check word verifies for the requested key.  Collisions and torn
concurrent writes therefore surface as NULL (a false negative), while another
key's value leaks through only on a 64-bit hash collision.

Keys may be ints, bytes, str or :class:`~pktaccel.core.ConnKey`; they are
reduced to a 64-bit word first.  Values are unsigned 64-bit ints.
"""

from __future__ import annotations

import threading
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import _backend
from .core import MASK64, SEED_CHECK, SEED_SLOT, fingerprint32, key64, mix64, mix64_np

L_WORD = 2**64


def fn_probability(k_count: int, n: int) -> float:
    """Chance that a stored key reads back as NULL with ``k_count`` keys in ``n`` slots."""
    if k_count < 1 or n < 1:
        raise ValueError("k_count and n must be >= 1")
    return (k_count - 1) / (2 * n)


def fp_probability(k_count: int, l: int = L_WORD) -> float:
    if k_count < 1 or l < 1:
        raise ValueError("k_count and l must be >= 1")
    return (k_count - 1) / (2 * l)


def slot_hash(k: int) -> int:
    return mix64(k ^ SEED_SLOT)


def check_hash(k: int, v: int) -> int:
    return mix64(mix64(k ^ SEED_CHECK) ^ v) or 1


def _check_hash_np(keys: np.ndarray, values: np.ndarray) -> np.ndarray:
    h = mix64_np(mix64_np(keys ^ np.uint64(SEED_CHECK)) ^ values)
    h[h == 0] = 1
    return h


class PyLfnCore:
    """Pure-Python/numpy twin of the compiled core (64-bit keys only)."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("table size must be >= 1")
        self.n = int(n)
        self._val = np.zeros(self.n, dtype=np.uint64)
        self._chk = np.zeros(self.n, dtype=np.uint64)

    def slot_of(self, key: int) -> int:
        return slot_hash(key) % self.n

    def put(self, key: int, value: int) -> None:
        e = slot_hash(key) % self.n
        self._val[e] = value
        self._chk[e] = check_hash(key, value)

    def get(self, key: int) -> Optional[int]:
        e = slot_hash(key) % self.n
        c = int(self._chk[e])
        v = int(self._val[e])
        if c and c == check_hash(key, v):
            return v
        return None

    def raw_slot(self, e: int):
        return int(self._val[e]), int(self._chk[e])

    def _slots(self, keys: np.ndarray) -> np.ndarray:
        return (mix64_np(keys ^ np.uint64(SEED_SLOT)) % np.uint64(self.n)).astype(np.int64)

    def put_many(self, keys, values) -> None:
        keys = np.asarray(keys, dtype=np.uint64)
        values = np.asarray(values, dtype=np.uint64)
        slots = self._slots(keys)
        # last write wins per slot, as with sequential puts
        _, last_rev = np.unique(slots[::-1], return_index=True)
        idx = len(slots) - 1 - last_rev
        self._val[slots[idx]] = values[idx]
        self._chk[slots[idx]] = _check_hash_np(keys[idx], values[idx])

    def get_many(self, keys, out, found) -> int:
        keys = np.asarray(keys, dtype=np.uint64)
        slots = self._slots(keys)
        v = self._val[slots]
        c = self._chk[slots]
        ok = (c != 0) & (c == _check_hash_np(keys, v))
        out[:] = np.where(ok, v, 0)
        found[:] = ok
        return int(ok.sum())

    def _wipe_many(self, keys) -> None:
        slots = self._slots(np.asarray(keys, dtype=np.uint64))
        self._val[slots] = 0
        self._chk[slots] = 0

    def clear(self) -> None:
        self._val[:] = 0
        self._chk[:] = 0

    def occupied(self) -> int:
        return int(np.count_nonzero(self._chk))

    @property
    def footprint_bytes(self) -> int:
        return self._val.nbytes + self._chk.nbytes


LfnCore = _backend.speedups.LfnCore if _backend.COMPILED else PyLfnCore


@dataclass
class LfnStats:
    puts: int = 0
    gets: int = 0
    hits: int = 0
    nulls: int = 0

    def as_dict(self):
        return asdict(self)


class LfnTable:
    """Fixed-size connection cache; see module docstring.

    ``stats`` counters are bumped without synchronisation and are advisory
    under concurrent use.
    """

    def __init__(self, n: int, backend: Optional[str] = None):
        if backend is None:
            backend = _backend.name()
        if backend == "compiled":
            if not _backend.COMPILED:
                raise RuntimeError("compiled backend not available")
            self._core = _backend.speedups.LfnCore(n)
        elif backend == "python":
            self._core = PyLfnCore(n)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.n = int(n)
        self.l = L_WORD
        self.stats = LfnStats()

    def put(self, k, v: int) -> None:
        if not 0 <= v <= MASK64:
            raise ValueError("value must fit in 64 bits")
        self.stats.puts += 1
        self._core.put(key64(k), v)

    def get(self, k) -> Optional[int]:
        v = self._core.get(key64(k))
        self.stats.gets += 1
        if v is None:
            self.stats.nulls += 1
        else:
            self.stats.hits += 1
        return v

    def slot_of(self, k) -> int:
        return self._core.slot_of(key64(k))

    def clear(self) -> None:
        self._core.clear()

    def occupied(self) -> int:
        return self._core.occupied()

    @property
    def footprint_bytes(self) -> int:
        return self._core.footprint_bytes

    @property
    def core(self):
        return self._core


# ---------------------------------------------------------------------------
# Monte Carlo measurements
# ---------------------------------------------------------------------------

def measure_fn_rate(k: int, n: int, trials: int, seed: int = 0, backend: Optional[str] = None):
    """Fill an empty table with ``k`` random keys and read them back, ``trials`` times.

    Returns ``(false_negatives, false_positives, queries)``.
    """
    backend = backend or _backend.name()
    if backend == "compiled":
        return _backend.speedups.lfn_fn_trials(n, k, trials, seed & MASK64)
    core = PyLfnCore(n)
    rng = np.random.default_rng(seed)
    fn = fp = 0
    out = np.empty(k, dtype=np.uint64)
    found = np.empty(k, dtype=bool)
    values = np.arange(1, k + 1, dtype=np.uint64)
    for _ in range(trials):
        keys = rng.integers(0, 2**64, size=k, dtype=np.uint64)
        core.put_many(keys, values)
        core.get_many(keys, out, found)
        fn += int((~found).sum())
        fp += int((found & (out != values)).sum())
        core._wipe_many(keys)
    return fn, fp, k * trials


def count_false_positives(table: LfnTable, queries: int, seed: int = 0, chunk: int = 1 << 20) -> int:
    """Query never-inserted keys (top bit set) and count how many verify.

    The table must only hold keys with the top bit clear.
    """
    if table.backend == "compiled":
        return _backend.speedups.lfn_fp_scan(table.core, queries, seed & MASK64)
    rng = np.random.default_rng(seed)
    top = np.uint64(1 << 63)
    hits = 0
    out = np.empty(chunk, dtype=np.uint64)
    found = np.empty(chunk, dtype=bool)
    left = queries
    while left > 0:
        m = min(chunk, left)
        keys = rng.integers(0, 2**64, size=m, dtype=np.uint64) | top
        hits += table.core.get_many(keys, out[:m], found[:m])
        left -= m
    return hits


def fill_random(table: LfnTable, count: int, seed: int = 0) -> np.ndarray:
    """Insert ``count`` random keys with the top bit clear; return them."""
    rng = np.random.default_rng(seed)
    keys = rng.integers(0, 2**63, size=count, dtype=np.uint64)
    table.core.put_many(keys, np.arange(1, count + 1, dtype=np.uint64))
    return keys


@dataclass
class StressResult:
    ops: int
    reader_hits: int
    violations: int
    seconds: float


def concurrent_stress(table: LfnTable, writers: int = 8, readers: int = 8, ops_per_thread: int = 10_000,
                      key_pool: int = 4096, seed: int = 1, torn_window: int = 0) -> StressResult:
    """Hammer ``table`` from real threads with fingerprint-encoded values.

    A violation is a non-NULL get whose value was never written for that key.
    """
    import time

    results = [None] * (writers + readers)

    if table.backend == "compiled":
        hammer = _backend.speedups.lfn_hammer

        def work(i):
            role = 0 if i < writers else 1
            results[i] = hammer(table.core, role, i, writers, ops_per_thread, key_pool,
                                (seed * 1_000_003 + i) & MASK64, torn_window)
    else:
        core = table.core

        def work(i):
            import random

            rng = random.Random(seed * 1_000_003 + i)
            hits = bad = 0
            if i < writers:
                for j in range(ops_per_thread):
                    k = rng.randrange(key_pool)
                    core.put(k, (fingerprint32(k) << 32) | (i << 24) | (j & 0xFFFFFF))
            else:
                for _ in range(ops_per_thread):
                    k = rng.randrange(key_pool)
                    v = core.get(k)
                    if v is not None:
                        hits += 1
                        if v >> 32 != fingerprint32(k) or (v >> 24) & 0xFF >= writers:
                            bad += 1
            results[i] = (ops_per_thread, hits, bad)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(writers + readers)]
    t0 = time.perf_counter()
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    dt = time.perf_counter() - t0
    return StressResult(
        ops=sum(r[0] for r in results),
        reader_hits=sum(r[1] for r in results),
        violations=sum(r[2] for r in results),
        seconds=dt,
    )
