"""Optional numba acceleration.

Set BOSEDIMER_DISABLE_NUMBA=1 to force the pure numpy/scipy code paths.
If numba cannot be imported the fallback is selected automatically.
"""
import os

ENV_FLAG = "BOSEDIMER_DISABLE_NUMBA"


def _disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


try:
    if _disabled():
        raise ImportError("numba disabled by environment")
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:
    _numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """numba.njit when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
