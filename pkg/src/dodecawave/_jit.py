"""Numba switch.

Kernels are compiled with numba when it is importable and the environment
variable ``DODECAWAVE_JIT`` is not ``0``.  Otherwise the vectorized numpy
implementations in each module are used.
"""

import os

try:
    import numba

    NUMBA_AVAILABLE = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover
    numba = None
    NUMBA_AVAILABLE = False

JIT_ENABLED = NUMBA_AVAILABLE and os.environ.get("DODECAWAVE_JIT", "1") != "0"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity decorator otherwise."""
    if NUMBA_AVAILABLE:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


if NUMBA_AVAILABLE:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


def configure_threads():
    """Honour ``DODECAWAVE_THREADS`` as a cap on numba worker threads."""
    value = os.environ.get("DODECAWAVE_THREADS")
    if not value or not NUMBA_AVAILABLE:
        return
    try:
        n = int(value)
    except ValueError:
        return
    if n >= 1:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


configure_threads()
