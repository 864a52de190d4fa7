"""Optional numba acceleration.

Kernels in :mod:`smdrate.kernels` are written in the subset of Python that
numba can compile. They are wrapped with :func:`maybe_njit`, which compiles
them when numba is importable and ``SMDRATE_DISABLE_NUMBA`` is unset (or
``0``), and otherwise returns the plain function unchanged.
"""
import os

_flag = os.environ.get("SMDRATE_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba as _numba
    USE_NUMBA = True
except ImportError:
    _numba = None
    USE_NUMBA = False


def maybe_njit(func):
    if USE_NUMBA:
        # fastmath stays off: the numba and numpy paths must agree to rounding
        return _numba.njit(cache=True, nogil=True)(func)
    return func


def backend():
    return "numba" if USE_NUMBA else "numpy"
