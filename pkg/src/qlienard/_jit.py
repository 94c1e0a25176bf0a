"""Numba switch for the hot kernels.

Set ``QLIENARD_NO_JIT=1`` to run every kernel as plain Python (same source,
no compilation). Useful for debugging, coverage and for hosts without numba.
"""

import os

_OFF = {"1", "true", "yes", "on"}

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("QLIENARD_NO_JIT", "").lower() not in _OFF


def njit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn
