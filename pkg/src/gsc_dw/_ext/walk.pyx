# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Absorbed simple random walks on a CSR graph with counter-based draws."""

from libc.stdint cimport int64_t, uint64_t, uint8_t

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL


cdef inline uint64_t mix64(uint64_t x) noexcept nogil:
    x = (x ^ (x >> 30)) * M1
    x = (x ^ (x >> 27)) * M2
    return x ^ (x >> 31)


cdef int64_t _run(const int64_t[::1] indptr, const int64_t[::1] indices,
                  const uint8_t[::1] absorbing, const uint64_t[::1] keys,
                  const int64_t[::1] starts, int64_t[::1] out,
                  int64_t max_steps) noexcept nogil:
    cdef Py_ssize_t t
    cdef int64_t cell, steps, lo, deg
    cdef uint64_t key, u
    for t in range(keys.shape[0]):
        key = keys[t]
        cell = starts[t]
        steps = 0
        while not absorbing[cell]:
            if steps >= max_steps:
                return t
            steps += 1
            u = mix64(key + <uint64_t>(steps + 1) * GAMMA)
            lo = indptr[cell]
            deg = indptr[cell + 1] - lo
            cell = indices[lo + <int64_t>(((u >> 32) * <uint64_t>deg) >> 32)]
        out[t] = steps
    return -1


def crossing_steps(indptr, indices, absorbing, keys, starts, int64_t max_steps):
    """Steps to absorption for each trial; raises if one exceeds ``max_steps``.

    Step ``s`` (1-based) of the trial with key ``k`` uses draw
    ``mix64(k + (s + 1) * GAMMA)``; counter 0 is reserved for the start.
    """
    import numpy as np

    out = np.empty(len(keys), dtype=np.int64)
    cdef const int64_t[::1] ip = indptr
    cdef const int64_t[::1] ix = indices
    cdef const uint8_t[::1] ab = absorbing
    cdef const uint64_t[::1] ks = keys
    cdef const int64_t[::1] st = starts
    cdef int64_t[::1] o = out
    cdef int64_t bad
    with nogil:
        bad = _run(ip, ix, ab, ks, st, o, max_steps)
    if bad >= 0:
        raise OverflowError(bad)
    return out
