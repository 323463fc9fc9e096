"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``GSC_DW_PURE=1`` to force the numpy path.
"""

import os

from . import _walk_py

BACKEND = "python"
crossing_steps = _walk_py.crossing_steps

if os.environ.get("GSC_DW_PURE", "") in ("", "0"):
    try:
        from ._ext import walk as _walk_ext
    except ImportError:  # extension not built
        _walk_ext = None
    else:
        crossing_steps = _walk_ext.crossing_steps
        BACKEND = "cython"

python_crossing_steps = _walk_py.crossing_steps
