"""Kernel backend selection.

``PROFILEST_BACKEND=numpy`` forces the pure numpy/python kernels even when
numba is importable.  Anything else (or unset) uses numba when available.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

HAVE_NUMBA = numba is not None
REQUESTED = os.environ.get("PROFILEST_BACKEND", "numba").strip().lower()
USE_NUMBA = HAVE_NUMBA and REQUESTED != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` with numba (cached) when available, else return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
