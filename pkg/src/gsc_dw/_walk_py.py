"""Pure numpy version of the walk kernel in ``_ext/walk.pyx``.

All live walkers advance together, one step per loop iteration. Draws come
from the same counter-based stream, so results match the compiled kernel
bit for bit.
"""

import numpy as np

from .rng import draw_array, bounded_array


def crossing_steps(indptr, indices, absorbing, keys, starts, max_steps):
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    absorbing = np.asarray(absorbing, dtype=bool)
    keys = np.asarray(keys, dtype=np.uint64)
    cell = np.array(starts, dtype=np.int64)
    out = np.zeros(len(keys), dtype=np.int64)
    live = np.flatnonzero(~absorbing[cell])
    steps = 0
    while len(live):
        if steps >= max_steps:
            raise OverflowError(int(live[0]))
        steps += 1
        c = cell[live]
        u = draw_array(keys[live], np.uint64(steps))
        lo = indptr[c]
        deg = indptr[c + 1] - lo
        c = indices[lo + bounded_array(u, deg).astype(np.int64)]
        cell[live] = c
        out[live] = steps
        live = live[~absorbing[c]]
    return out
