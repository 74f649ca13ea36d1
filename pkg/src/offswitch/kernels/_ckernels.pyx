# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte-Carlo kernels. Same draw order as ``_pykernels``."""

from libc.stdint cimport uint64_t, int64_t, uint8_t
from libc.stdlib cimport calloc, free
import numpy as np

cdef double _INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _next(uint64_t* state) nogil:
    state[0] += 0x9E3779B97F4A7C15ULL
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t* state) nogil:
    return (_next(state) >> 11) * _INV53


def glitch_trials(uint64_t seed, long trials, long n_targets, double p_flip,
                  double detector_p, double coverage):
    cdef uint64_t state = seed
    cdef long successes = 0, trips = 0, defeated = 0, t, b
    cdef bint ok
    with nogil:
        for t in range(trials):
            ok = True
            for b in range(n_targets):
                if coverage < 1.0 and _uniform(&state) >= coverage:
                    ok = False
                    break
                if _uniform(&state) >= p_flip:
                    ok = False
                    break
                if detector_p > 0.0 and _uniform(&state) < detector_p:
                    trips += 1
                    ok = False
                    break
                defeated += 1
            if ok:
                successes += 1
    return successes, trips, defeated


def forgery_attempts(uint64_t seed, targets, widths, int64_t max_attempts):
    cdef uint64_t[:] tv = np.ascontiguousarray(targets, dtype=np.uint64)
    cdef int64_t[:] wv = np.ascontiguousarray(widths, dtype=np.int64)
    cdef Py_ssize_t n = tv.shape[0], i
    out = np.zeros(n, dtype=np.int64)
    cdef int64_t[:] ov = out
    cdef uint64_t state = seed, mask, target
    cdef int64_t attempts
    with nogil:
        for i in range(n):
            if wv[i] < 64:
                mask = (<uint64_t>1 << wv[i]) - 1
            else:
                mask = 0xFFFFFFFFFFFFFFFFULL
            target = tv[i] & mask
            attempts = 0
            while attempts < max_attempts:
                attempts += 1
                if (_next(&state) & mask) == target:
                    break
            ov[i] = attempts
    return out


def edit_trials(uint64_t seed, long trials, long n_edits, double p_success, double p_damage):
    cdef uint64_t state = seed
    cdef long undamaged = 0, unlocked = 0, t, e
    cdef bint bypassed_all, damaged
    with nogil:
        for t in range(trials):
            bypassed_all = True
            damaged = False
            for e in range(n_edits):
                if _uniform(&state) >= p_success:
                    bypassed_all = False
                if _uniform(&state) < p_damage:
                    damaged = True
            if not damaged:
                undamaged += 1
                if bypassed_all:
                    unlocked += 1
    return undamaged, unlocked


def collision_trials(uint64_t seed, long trials, long draws, int bits):
    if not 1 <= bits <= 28:
        raise ValueError("bits must be in [1, 28]")
    cdef uint64_t state = seed, v
    cdef int shift = 64 - bits
    cdef size_t size = (<size_t>1) << bits
    cdef long hits = 0, t, d
    cdef uint8_t* seen = <uint8_t*>calloc(size, 1)
    cdef uint64_t* used = <uint64_t*>calloc(draws if draws > 0 else 1, sizeof(uint64_t))
    cdef long n_used
    if seen == NULL or used == NULL:
        free(seen)
        free(used)
        raise MemoryError()
    try:
        with nogil:
            for t in range(trials):
                n_used = 0
                for d in range(draws):
                    v = _next(&state) >> shift
                    if seen[v]:
                        hits += 1
                        break
                    seen[v] = 1
                    used[n_used] = v
                    n_used += 1
                for d in range(n_used):
                    seen[used[d]] = 0
    finally:
        free(seen)
        free(used)
    return hits
