"""Counter-based random numbers keyed by (seed, trial, counter).

Each trial owns an independent stream, so results do not depend on the
order in which trials are run or on how they are split across threads.
The generator is SplitMix64: output ``t`` of a stream with key ``k`` is
``mix64(k + (t + 1) * GAMMA)``.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_SEED_SALT = 0xD1B54A32D192ED03


def mix64(x):
    """SplitMix64 finalizer on a Python int."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _M1) & MASK64
    x = ((x ^ (x >> 27)) * _M2) & MASK64
    return x ^ (x >> 31)


def stream_key(seed, trial):
    return mix64(mix64(seed ^ _SEED_SALT) + trial * GAMMA)


def draw(key, counter):
    return mix64(key + (counter + 1) * GAMMA)


def bounded(u, n):
    """Map a 64-bit draw to {0, ..., n-1} using its high 32 bits."""
    return ((u >> 32) * n) >> 32


# numpy versions; uint64 arithmetic wraps modulo 2**64 as required.

def mix64_array(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_M1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_M2)
    return x ^ (x >> np.uint64(31))


def stream_keys(seed, trials):
    """Keys for trials ``0 .. trials-1`` (or for an explicit index array)."""
    idx = np.arange(trials, dtype=np.uint64) if np.isscalar(trials) else np.asarray(trials, np.uint64)
    base = np.uint64(mix64(seed ^ _SEED_SALT))
    with np.errstate(over="ignore"):
        return mix64_array(base + idx * np.uint64(GAMMA))


def draw_array(keys, counters):
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_array(keys + (counters + np.uint64(1)) * np.uint64(GAMMA))


def bounded_array(u, n):
    u = np.asarray(u, dtype=np.uint64)
    n = np.asarray(n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return ((u >> np.uint64(32)) * n) >> np.uint64(32)
