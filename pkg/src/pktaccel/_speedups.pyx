# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled cores for the hot structures: LFN table, LBQ ring and MRPQ.

Every class here has a pure-Python twin with the same method surface; the
public modules pick one at import time (see ``pktaccel._backend``).
"""

from libc.stdint cimport uint64_t, int64_t, uint32_t, int32_t, uint8_t
from libc.stdlib cimport malloc, calloc, realloc, free
from libc.string cimport memset
from libc.math cimport floor, isfinite

cdef extern from "_atomics.h" nogil:
    uint64_t ld_acq_u64(const uint64_t *p)
    uint64_t ld_rlx_u64(const uint64_t *p)
    void st_rel_u64(uint64_t *p, uint64_t v)
    void st_rlx_u64(uint64_t *p, uint64_t v)
    int64_t ld_acq_i64(const int64_t *p)
    void st_rel_i64(int64_t *p, int64_t v)
    int ld_acq_int(const int *p)
    void st_rel_int(int *p, int v)
    int cas_int(int *p, int expected, int desired)
    int cas_u64(uint64_t *p, uint64_t expected, uint64_t desired)
    void cpu_relax()
    void spin_yield()
    uint64_t mix64(uint64_t z)
    uint64_t rng_next(uint64_t *state)
    uint64_t lfn_slot_hash(uint64_t key)
    uint64_t lfn_check_hash(uint64_t key, uint64_t value)
    uint32_t key_fingerprint(uint64_t key)
    int ctz64(uint64_t x)


def mix64_c(uint64_t z):
    return mix64(z)


# --------------------------------------------------------------------------
# LFN table
# --------------------------------------------------------------------------

cdef class LfnCore:
    """Fixed-size table of (value, check) word pairs; see ``pktaccel.lfn``."""

    cdef uint64_t *_val
    cdef uint64_t *_chk
    cdef readonly uint64_t n

    def __cinit__(self, uint64_t n):
        if n < 1:
            raise ValueError("table size must be >= 1")
        self.n = n
        self._val = <uint64_t *> calloc(n, sizeof(uint64_t))
        self._chk = <uint64_t *> calloc(n, sizeof(uint64_t))
        if self._val == NULL or self._chk == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self._val)
        free(self._chk)

    cdef inline void _put(self, uint64_t key, uint64_t v) noexcept nogil:
        cdef uint64_t e = lfn_slot_hash(key) % self.n
        st_rel_u64(&self._val[e], v)
        st_rel_u64(&self._chk[e], lfn_check_hash(key, v))

    cdef inline int _get(self, uint64_t key, uint64_t *out) noexcept nogil:
        cdef uint64_t e = lfn_slot_hash(key) % self.n
        # check is read first: a concurrent writer stores value then check,
        # so any mix of the two fails verification.
        cdef uint64_t c = ld_acq_u64(&self._chk[e])
        cdef uint64_t v = ld_acq_u64(&self._val[e])
        if c != 0 and c == lfn_check_hash(key, v):
            out[0] = v
            return 1
        return 0

    cdef inline void _wipe(self, uint64_t key) noexcept nogil:
        cdef uint64_t e = lfn_slot_hash(key) % self.n
        st_rel_u64(&self._chk[e], 0)
        st_rel_u64(&self._val[e], 0)

    def put(self, uint64_t key, uint64_t value):
        self._put(key, value)

    def get(self, uint64_t key):
        cdef uint64_t v
        if self._get(key, &v):
            return v
        return None

    def slot_of(self, uint64_t key):
        return lfn_slot_hash(key) % self.n

    def raw_slot(self, uint64_t e):
        return self._val[e], self._chk[e]

    def put_many(self, const uint64_t[::1] keys, const uint64_t[::1] values):
        cdef Py_ssize_t i
        with nogil:
            for i in range(keys.shape[0]):
                self._put(keys[i], values[i])

    def get_many(self, const uint64_t[::1] keys, uint64_t[::1] out, uint8_t[::1] found):
        cdef Py_ssize_t i
        cdef int64_t hits = 0
        cdef uint64_t v
        with nogil:
            for i in range(keys.shape[0]):
                if self._get(keys[i], &v):
                    out[i] = v
                    found[i] = 1
                    hits += 1
                else:
                    out[i] = 0
                    found[i] = 0
        return hits

    def clear(self):
        memset(self._val, 0, self.n * sizeof(uint64_t))
        memset(self._chk, 0, self.n * sizeof(uint64_t))

    def occupied(self):
        cdef uint64_t i
        cdef int64_t c = 0
        for i in range(self.n):
            if self._chk[i] != 0:
                c += 1
        return c

    @property
    def footprint_bytes(self):
        return 2 * self.n * sizeof(uint64_t)


def lfn_fn_trials(uint64_t n, uint64_t k, uint64_t trials, uint64_t seed):
    """Insert ``k`` random keys into an empty table, query them back.

    Returns ``(false_negatives, false_positives, queries)`` summed over all
    trials.  A query is a false negative when it returns NULL and a false
    positive when it returns a value that was not stored for that key.
    """
    cdef LfnCore t = LfnCore(n)
    cdef uint64_t *keys = <uint64_t *> malloc(k * sizeof(uint64_t))
    cdef uint64_t s = seed, i, tr, v
    cdef int64_t fn = 0, fp = 0
    if keys == NULL:
        raise MemoryError()
    with nogil:
        for tr in range(trials):
            for i in range(k):
                keys[i] = rng_next(&s)
                t._put(keys[i], i + 1)
            for i in range(k):
                if t._get(keys[i], &v):
                    if v != i + 1:
                        fp += 1
                else:
                    fn += 1
            for i in range(k):
                t._wipe(keys[i])
    free(keys)
    return fn, fp, k * trials


def lfn_fp_scan(LfnCore t, uint64_t queries, uint64_t seed):
    """Query ``queries`` keys carrying the top bit; return how many verify.

    Callers populate the table with keys whose top bit is clear, so every
    hit here is a false positive.
    """
    cdef uint64_t s = seed, i, v, key
    cdef int64_t hits = 0
    cdef uint64_t top = (<uint64_t> 1) << 63
    with nogil:
        for i in range(queries):
            key = rng_next(&s) | top
            if t._get(key, &v):
                hits += 1
    return hits


def lfn_hammer(LfnCore t, int role, uint32_t thread_id, uint32_t n_writers,
               uint64_t nops, uint64_t key_pool, uint64_t seed, int torn_window=0):
    """Concurrent stress loop; run one call per thread.

    Writers store ``fingerprint(key) << 32 | writer_id << 24 | counter``.
    Readers flag a violation when a non-NULL result carries another key's
    fingerprint or an impossible writer id.  Returns ``(ops, hits, violations)``.
    """
    cdef uint64_t s = seed, i, key, v, e, chk
    cdef int64_t hits = 0, bad = 0
    cdef int j
    with nogil:
        for i in range(nops):
            key = rng_next(&s) % key_pool
            if role == 0:
                v = ((<uint64_t> key_fingerprint(key)) << 32) | ((<uint64_t> thread_id & 0xFF) << 24) | (i & 0xFFFFFF)
                e = lfn_slot_hash(key) % t.n
                chk = lfn_check_hash(key, v)
                st_rel_u64(&t._val[e], v)
                for j in range(torn_window):
                    cpu_relax()
                st_rel_u64(&t._chk[e], chk)
            else:
                if t._get(key, &v):
                    hits += 1
                    if (v >> 32) != key_fingerprint(key) or ((v >> 24) & 0xFF) >= n_writers:
                        bad += 1
    return nops, hits, bad


# --------------------------------------------------------------------------
# Lockless bimodal queue
# --------------------------------------------------------------------------

cdef enum:
    HANDSHAKE = 0
    CAS = 1


cdef class LbqCore:
    """Single-producer ring with a dormant/active consumer; int64 handles."""

    cdef int64_t *slots
    cdef readonly uint64_t capacity
    cdef uint64_t mask
    cdef uint64_t off_p
    cdef uint64_t off_c
    cdef int req
    cdef int ack
    cdef int trans
    cdef int state
    cdef int variant
    cdef int64_t spin_limit
    cdef int cmode

    def __cinit__(self, uint64_t capacity, int variant=CAS, int64_t spin_limit=-1):
        if capacity < 1 or (capacity & (capacity - 1)) != 0:
            raise ValueError("capacity must be a power of two")
        if variant not in (HANDSHAKE, CAS):
            raise ValueError("unknown variant")
        self.capacity = capacity
        self.mask = capacity - 1
        self.slots = <int64_t *> calloc(capacity, sizeof(int64_t))
        if self.slots == NULL:
            raise MemoryError()
        self.variant = variant
        self.spin_limit = spin_limit

    def __dealloc__(self):
        free(self.slots)

    cdef inline void _publish(self, uint64_t p, int64_t h) noexcept nogil:
        self.slots[p & self.mask] = h
        st_rel_u64(&self.off_p, p + 1)

    cdef int _try_steal(self, int64_t *ev) noexcept nogil:
        # bounded-spin eviction while the consumer is active
        cdef uint64_t c = ld_acq_u64(&self.off_c)
        cdef int64_t old = self.slots[c & self.mask]
        if cas_u64(&self.off_c, c, c + 1):
            ev[0] = old
            return 1
        return 0

    cdef int enq(self, int64_t h, int64_t *ev) noexcept nogil:
        cdef uint64_t p, c
        cdef int64_t spins = 0
        cdef int evicted = 0
        p = self.off_p
        while True:
            c = ld_acq_u64(&self.off_c)
            if self.variant == HANDSHAKE:
                if not ld_acq_int(&self.req):
                    if ld_acq_int(&self.ack):
                        st_rel_int(&self.ack, 0)
                    c = ld_acq_u64(&self.off_c)
                    if p - c == self.capacity:
                        ev[0] = self.slots[c & self.mask]
                        st_rel_u64(&self.off_c, c + 1)
                        evicted = 1
                    self._publish(p, h)
                    return evicted
                if not ld_acq_int(&self.ack):
                    st_rel_int(&self.ack, 1)
                if p - c < self.capacity:
                    self._publish(p, h)
                    return 0
            else:
                if p - c < self.capacity:
                    self._publish(p, h)
                    return 0
                if not ld_acq_int(&self.state):
                    if cas_int(&self.trans, 0, 1):
                        if not ld_acq_int(&self.state):
                            c = ld_acq_u64(&self.off_c)
                            if p - c == self.capacity:
                                ev[0] = self.slots[c & self.mask]
                                st_rel_u64(&self.off_c, c + 1)
                                evicted = 1
                            self._publish(p, h)
                            st_rel_int(&self.trans, 0)
                            return evicted
                        st_rel_int(&self.trans, 0)
                    spin_yield()
                    continue
            # active consumer and a full ring: wait for a free slot
            spins += 1
            if self.spin_limit >= 0 and spins > self.spin_limit:
                if self._try_steal(ev):
                    self._publish(p, h)
                    return 1
            if spins & 63 == 0:
                spin_yield()
            else:
                cpu_relax()

    cdef int deq(self, int64_t *out) noexcept nogil:
        cdef uint64_t c, p
        while True:
            c = ld_acq_u64(&self.off_c)
            p = ld_acq_u64(&self.off_p)
            if p == c:
                return 0
            out[0] = self.slots[c & self.mask]
            if self.spin_limit >= 0:
                if cas_u64(&self.off_c, c, c + 1):
                    return 1
            else:
                st_rel_u64(&self.off_c, c + 1)
                return 1

    cdef void start_c(self) noexcept nogil:
        cdef int64_t spins = 0
        if self.cmode:
            return
        if self.variant == HANDSHAKE:
            st_rel_int(&self.req, 1)
            while not ld_acq_int(&self.ack):
                spins += 1
                if spins & 15 == 0:
                    spin_yield()
                else:
                    cpu_relax()
        else:
            while not cas_int(&self.trans, 0, 1):
                spin_yield()
            st_rel_int(&self.state, 1)
            st_rel_int(&self.trans, 0)
        self.cmode = 1

    cdef void stop_c(self) noexcept nogil:
        cdef int64_t spins = 0
        if not self.cmode:
            return
        if self.variant == HANDSHAKE:
            st_rel_int(&self.req, 0)
            while ld_acq_int(&self.ack):
                spins += 1
                if spins & 15 == 0:
                    spin_yield()
                else:
                    cpu_relax()
        else:
            while not cas_int(&self.trans, 0, 1):
                spin_yield()
            st_rel_int(&self.state, 0)
            st_rel_int(&self.trans, 0)
        self.cmode = 0

    def enqueue(self, int64_t handle):
        cdef int64_t ev = 0
        cdef int r
        with nogil:
            r = self.enq(handle, &ev)
        if r:
            return 1, ev
        return 0, None

    def dequeue(self):
        cdef int64_t v
        if self.deq(&v):
            return True, v
        return False, None

    def start_consumer(self):
        with nogil:
            self.start_c()

    def stop_consumer(self):
        with nogil:
            self.stop_c()

    @property
    def active(self):
        return bool(self.cmode)

    @property
    def occupancy(self):
        return ld_acq_u64(&self.off_p) - ld_acq_u64(&self.off_c)

    @property
    def offsets(self):
        return ld_acq_u64(&self.off_p), ld_acq_u64(&self.off_c)


def lbq_produce(LbqCore q, int64_t count, int64_t[::1] evicted, int64_t[::1] ctl):
    """Enqueue handles 0, 1, ... until ``count`` are stored.

    If ``ctl[0]`` is still 0 (consumer not finished) production continues past
    ``count`` so that handshake transitions can complete, up to the length
    of ``evicted``.  Returns ``(enqueued, n_evicted)``.
    """
    cdef int64_t i = 0, ne = 0, ev = 0
    cdef int64_t limit = evicted.shape[0]
    cdef int ack0
    with nogil:
        while i < limit:
            if i >= count and ld_acq_i64(&ctl[0]) != 0:
                break
            ack0 = ld_acq_int(&q.ack)
            if q.enq(i, &ev):
                evicted[ne] = ev
                ne += 1
            i += 1
            # on one core the consumer only sees an acknowledgement if we step aside
            if ld_acq_int(&q.ack) != ack0 or i & 1023 == 0:
                spin_yield()
        st_rel_i64(&ctl[1], 1)
    return i, ne


def lbq_consume_toggling(LbqCore q, int64_t expected, int64_t toggles, int64_t burst,
                         int64_t[::1] consumed, int64_t[::1] ctl):
    """Wake ``toggles`` times, spaced by producer progress; drain ``burst`` each time.

    Sets ``ctl[0] = 1`` when done.  Returns the number of consumed handles.
    """
    cdef int64_t t, got, nc = 0, v
    cdef uint64_t threshold
    with nogil:
        for t in range(toggles):
            threshold = <uint64_t> ((t + 1) * expected // (toggles + 1))
            while ld_acq_u64(&q.off_p) < threshold and not ld_acq_i64(&ctl[1]):
                spin_yield()
            q.start_c()
            got = 0
            while got < burst and nc < consumed.shape[0]:
                if q.deq(&v):
                    consumed[nc] = v
                    nc += 1
                    got += 1
                elif ld_acq_i64(&ctl[1]):
                    break
                else:
                    spin_yield()
            q.stop_c()
        st_rel_i64(&ctl[0], 1)
    return nc


# --------------------------------------------------------------------------
# Multiresolution priority queue
# --------------------------------------------------------------------------

from pktaccel.errors import OutOfHorizonError, QueueFullError, InvalidHandleError


cdef class TimerEntry:
    cdef readonly double priority
    cdef readonly object payload_id
    cdef readonly object handle

    def __init__(self, double priority, payload_id=None, handle=None):
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
        return hash((self.priority, self.handle))


cdef inline TimerEntry _entry(double p, object payload, object handle):
    cdef TimerEntry e = TimerEntry.__new__(TimerEntry)
    e.priority = p
    e.payload_id = payload
    e.handle = handle
    return e


cdef class Mrpq:
    """Calendar of ``ceil(horizon / resolution)`` FIFO buckets with a two-level bitmap."""

    cdef readonly double resolution
    cdef readonly double horizon
    cdef readonly int64_t bucket_count
    cdef int64_t base
    cdef double last_floor
    cdef int32_t *head
    cdef int32_t *tail
    cdef uint64_t *l0
    cdef uint64_t *l1
    cdef int64_t nw0, nw1
    cdef double *prio
    cdef int64_t *band
    cdef int32_t *nxt
    cdef int32_t *prv
    cdef uint32_t *gen
    cdef list payloads
    cdef int32_t free_head
    cdef int64_t cap
    cdef int64_t size
    cdef int64_t max_size

    def __cinit__(self, double resolution=1.0, double horizon=65536.0, max_size=None, double origin=0.0):
        cdef int64_t i
        if not (resolution > 0) or not isfinite(resolution):
            raise ValueError("resolution must be > 0")
        if not (horizon > 0) or not isfinite(horizon):
            raise ValueError("horizon must be > 0")
        cdef double nb = horizon / resolution
        cdef int64_t nbi = <int64_t> nb
        if nbi < nb:
            nbi += 1
        if nbi < 2:
            raise ValueError("horizon / resolution must give at least 2 buckets")
        if nbi > (1 << 30):
            raise ValueError("too many buckets")
        self.resolution = resolution
        self.horizon = horizon
        self.bucket_count = nbi
        self.base = <int64_t> floor(origin / resolution)
        self.last_floor = -1e308
        self.head = <int32_t *> malloc(nbi * sizeof(int32_t))
        self.tail = <int32_t *> malloc(nbi * sizeof(int32_t))
        self.nw0 = (nbi + 63) >> 6
        self.nw1 = (self.nw0 + 63) >> 6
        self.l0 = <uint64_t *> calloc(self.nw0, sizeof(uint64_t))
        self.l1 = <uint64_t *> calloc(self.nw1, sizeof(uint64_t))
        if self.head == NULL or self.tail == NULL or self.l0 == NULL or self.l1 == NULL:
            raise MemoryError()
        for i in range(nbi):
            self.head[i] = -1
            self.tail[i] = -1
        self.max_size = -1 if max_size is None else int(max_size)
        self.payloads = []
        self.free_head = -1
        self.cap = 0
        self.size = 0
        self._grow(1024)

    def __dealloc__(self):
        free(self.head); free(self.tail); free(self.l0); free(self.l1)
        free(self.prio); free(self.band); free(self.nxt); free(self.prv); free(self.gen)

    cdef int _grow(self, int64_t newcap) except -1:
        cdef int64_t i
        if newcap > 0x7FFFFFFF:
            raise QueueFullError("node pool exhausted")
        self.prio = <double *> realloc(self.prio, newcap * sizeof(double))
        self.band = <int64_t *> realloc(self.band, newcap * sizeof(int64_t))
        self.nxt = <int32_t *> realloc(self.nxt, newcap * sizeof(int32_t))
        self.prv = <int32_t *> realloc(self.prv, newcap * sizeof(int32_t))
        self.gen = <uint32_t *> realloc(self.gen, newcap * sizeof(uint32_t))
        if self.prio == NULL or self.band == NULL or self.nxt == NULL or self.prv == NULL or self.gen == NULL:
            raise MemoryError()
        self.payloads.extend([None] * (newcap - self.cap))
        # new nodes pushed so that the lowest index is handed out first
        for i in range(newcap - 1, self.cap - 1, -1):
            self.gen[i] = 0
            self.nxt[i] = self.free_head
            self.free_head = <int32_t> i
        self.cap = newcap
        return 0

    cdef inline int64_t _slot(self, int64_t b) noexcept:
        cdef int64_t s = b % self.bucket_count
        if s < 0:
            s += self.bucket_count
        return s

    cdef inline void _set(self, int64_t s) noexcept:
        cdef int64_t w = s >> 6
        self.l0[w] |= (<uint64_t> 1) << (s & 63)
        self.l1[w >> 6] |= (<uint64_t> 1) << (w & 63)

    cdef inline void _clear(self, int64_t s) noexcept:
        cdef int64_t w = s >> 6
        self.l0[w] &= ~((<uint64_t> 1) << (s & 63))
        if self.l0[w] == 0:
            self.l1[w >> 6] &= ~((<uint64_t> 1) << (w & 63))

    cdef inline int64_t _first_ge(self, int64_t s) noexcept:
        cdef int64_t w, v
        cdef uint64_t bits
        if s >= self.bucket_count:
            return -1
        w = s >> 6
        bits = self.l0[w] & ((~(<uint64_t> 0)) << (s & 63))
        if bits:
            return (w << 6) + ctz64(bits)
        w += 1
        if w >= self.nw0:
            return -1
        v = w >> 6
        bits = self.l1[v] & ((~(<uint64_t> 0)) << (w & 63))
        while not bits:
            v += 1
            if v >= self.nw1:
                return -1
            bits = self.l1[v]
        w = (v << 6) + ctz64(bits)
        return (w << 6) + ctz64(self.l0[w])

    cdef inline int64_t _min_slot(self) noexcept:
        cdef int64_t s0 = self._slot(self.base)
        cdef int64_t s = self._first_ge(s0)
        if s < 0:
            s = self._first_ge(0)
        return s

    cdef inline void _unlink(self, int32_t i) noexcept:
        cdef int64_t s = self._slot(self.band[i])
        cdef int32_t p = self.prv[i], n = self.nxt[i]
        if p >= 0:
            self.nxt[p] = n
        else:
            self.head[s] = n
        if n >= 0:
            self.prv[n] = p
        else:
            self.tail[s] = p
        if self.head[s] < 0:
            self._clear(s)

    cdef inline object _release(self, int32_t i):
        cdef object payload = self.payloads[i]
        self.payloads[i] = None
        self.gen[i] += 1
        self.nxt[i] = self.free_head
        self.free_head = i
        self.size -= 1
        return payload

    cdef inline object _handle(self, int32_t i):
        return ((<uint64_t> self.gen[i]) << 32) | <uint64_t> i

    cdef int64_t _band_of(self, double priority) except? -1:
        if not isfinite(priority):
            raise OutOfHorizonError("priority must be finite")
        cdef double b = floor(priority / self.resolution)
        if b < -9.0e18 or b > 9.0e18:
            raise OutOfHorizonError("priority out of range")
        return <int64_t> b

    def insert(self, double priority, payload_id=None):
        cdef int64_t b = self._band_of(priority)
        cdef int64_t s
        cdef int32_t i, t
        if self.size == 0 and b >= self.base + self.bucket_count:
            self.base = b
        if b < self.base or b >= self.base + self.bucket_count:
            raise OutOfHorizonError(
                f"priority {priority!r} outside [{self.base * self.resolution!r}, "
                f"{(self.base + self.bucket_count) * self.resolution!r})")
        if self.max_size >= 0 and self.size >= self.max_size:
            raise QueueFullError("queue at capacity")
        if self.free_head < 0:
            self._grow(self.cap * 2)
        i = self.free_head
        self.free_head = self.nxt[i]
        self.gen[i] += 1
        self.prio[i] = priority
        self.band[i] = b
        self.payloads[i] = payload_id
        s = self._slot(b)
        t = self.tail[s]
        self.nxt[i] = -1
        self.prv[i] = t
        if t >= 0:
            self.nxt[t] = i
        else:
            self.head[s] = i
            self._set(s)
        self.tail[s] = i
        self.size += 1
        return ((<uint64_t> self.gen[i]) << 32) | <uint64_t> i

    def peek(self):
        if self.size == 0:
            return None
        cdef int32_t i = self.head[self._min_slot()]
        return _entry(self.prio[i], self.payloads[i], self._handle(i))

    def extract_min(self):
        if self.size == 0:
            return None
        cdef int32_t i = self.head[self._min_slot()]
        cdef object h = self._handle(i)
        cdef double p = self.prio[i]
        self.base = self.band[i]
        self._unlink(i)
        return _entry(p, self._release(i), h)

    def extract(self, handle):
        cdef uint64_t hv
        try:
            hv = handle
        except (TypeError, OverflowError):
            raise InvalidHandleError(handle)
        cdef int64_t i = <int64_t> (hv & 0xFFFFFFFF)
        cdef uint32_t g = <uint32_t> (hv >> 32)
        if i >= self.cap or self.gen[i] != g or (g & 1) == 0:
            raise InvalidHandleError(handle)
        cdef double p = self.prio[i]
        self._unlink(<int32_t> i)
        return _entry(p, self._release(<int32_t> i), handle)

    def advance_floor(self, double new_floor):
        cdef list out = []
        cdef int64_t fb, s
        cdef int32_t i, nx
        cdef double p
        if new_floor < self.last_floor:
            raise ValueError("floor must not move backwards")
        self.last_floor = new_floor
        fb = self._band_of(new_floor)
        if fb <= self.base:
            return out
        while self.size > 0:
            s = self._min_slot()
            i = self.head[s]
            if self.band[i] >= fb:
                break
            self.base = self.band[i]
            while i >= 0:
                nx = self.nxt[i]
                p = self.prio[i]
                h = self._handle(i)
                out.append(_entry(p, self._release(i), h))
                i = nx
            self.head[s] = -1
            self.tail[s] = -1
            self._clear(s)
        self.base = fb
        return out

    def __len__(self):
        return self.size

    @property
    def floor_band(self):
        return self.base

    def band_of(self, double priority):
        return self._band_of(priority)
