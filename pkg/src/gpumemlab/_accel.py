"""Numba switch for the hot kernels.

Set ``GPUMEMLAB_DISABLE_NUMBA=1`` to run every kernel as plain Python/NumPy.
The flag is read once at import time.
"""
import os

DISABLED = os.environ.get("GPUMEMLAB_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def jit(fn):
    """Compile ``fn`` with numba when enabled; keep the Python original on ``.py_func``."""
    if HAVE_NUMBA:
        compiled = _njit(cache=True, nogil=True)(fn)
        return compiled
    fn.py_func = fn
    return fn
