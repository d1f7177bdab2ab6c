"""Optional numba acceleration.

Kernels are written once as plain Python over numpy arrays.  When numba is
importable and ``LAB_DISABLE_NUMBA`` is unset (or "0"), :func:`jit` compiles
them with ``numba.njit``; otherwise the function is returned unchanged and a
vectorised numpy fallback (defined next to each kernel) is used instead.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def numba_disabled():
    return os.environ.get("LAB_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not numba_disabled()


def jit(func):
    """Compile ``func`` with numba when available, else return it untouched."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
