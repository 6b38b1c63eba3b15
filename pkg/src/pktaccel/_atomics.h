/* Thin wrappers over the GCC/Clang __atomic builtins, plus the shared hashes. */
#ifndef PKTACCEL_ATOMICS_H
#define PKTACCEL_ATOMICS_H

#include <stdint.h>
#include <sched.h>

static inline uint64_t ld_acq_u64(const volatile uint64_t *p) { return __atomic_load_n(p, __ATOMIC_ACQUIRE); }
static inline uint64_t ld_rlx_u64(const volatile uint64_t *p) { return __atomic_load_n(p, __ATOMIC_RELAXED); }
static inline void st_rel_u64(volatile uint64_t *p, uint64_t v) { __atomic_store_n(p, v, __ATOMIC_RELEASE); }
static inline void st_rlx_u64(volatile uint64_t *p, uint64_t v) { __atomic_store_n(p, v, __ATOMIC_RELAXED); }

static inline int64_t ld_acq_i64(const volatile int64_t *p) { return __atomic_load_n(p, __ATOMIC_ACQUIRE); }
static inline void st_rel_i64(volatile int64_t *p, int64_t v) { __atomic_store_n(p, v, __ATOMIC_RELEASE); }

static inline int ld_acq_int(const volatile int *p) { return __atomic_load_n(p, __ATOMIC_ACQUIRE); }
static inline void st_rel_int(volatile int *p, int v) { __atomic_store_n(p, v, __ATOMIC_RELEASE); }

static inline int cas_int(volatile int *p, int expected, int desired) {
    return __atomic_compare_exchange_n(p, &expected, desired, 0, __ATOMIC_ACQ_REL, __ATOMIC_ACQUIRE);
}
static inline int cas_u64(volatile uint64_t *p, uint64_t expected, uint64_t desired) {
    return __atomic_compare_exchange_n(p, &expected, desired, 0, __ATOMIC_ACQ_REL, __ATOMIC_ACQUIRE);
}

static inline void cpu_relax(void) {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_ia32_pause();
#endif
}

static inline void spin_yield(void) { sched_yield(); }

/* 64-bit avalanche mixer (splitmix64 finalizer) shared with the Python fallback. */
#define PKT_GOLDEN      0x9E3779B97F4A7C15ULL
#define PKT_SEED_SLOT   0x13198A2E03707344ULL
#define PKT_SEED_CHECK  0xA4093822299F31D0ULL
#define PKT_SEED_FP     0x082EFA98EC4E6C89ULL

static inline uint64_t mix64(uint64_t z) {
    z += PKT_GOLDEN;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

static inline uint64_t rng_next(uint64_t *state) {
    *state += PKT_GOLDEN;
    uint64_t z = *state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

static inline uint64_t lfn_slot_hash(uint64_t key) { return mix64(key ^ PKT_SEED_SLOT); }
static inline uint64_t lfn_check_hash(uint64_t key, uint64_t value) {
    uint64_t h = mix64(mix64(key ^ PKT_SEED_CHECK) ^ value);
    return h ? h : 1;
}
static inline uint32_t key_fingerprint(uint64_t key) { return (uint32_t)(mix64(key ^ PKT_SEED_FP) >> 32); }

static inline int ctz64(uint64_t x) { return __builtin_ctzll(x); }

#endif
