"""Kernel backend selection.

The hot inner loops (grid queries, Snell crossings, ray intersection, M3C2
accumulation) exist twice: a numba ``@njit`` implementation and a vectorized
pure-numpy fallback. The active backend is chosen once at import time:

* ``BATHYCORR_NUMBA=0`` (or ``false``/``no``/``off``) forces the numpy path;
* otherwise numba is used when importable, numpy when it is not.

Both implementations share one function-level API (see ``_kernels_numpy`` for
the reference signatures); ``benchmarks/bench_kernels.py`` times them against
each other.
"""

import os

from . import _kernels_numpy

_FALSE_VALUES = ("0", "false", "no", "off")


def _numba_requested() -> bool:
    return os.environ.get("BATHYCORR_NUMBA", "1").strip().lower() not in _FALSE_VALUES


USE_NUMBA = False
if _numba_requested():
    try:
        from . import _kernels_numba

        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False

kernels = _kernels_numba if USE_NUMBA else _kernels_numpy


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
