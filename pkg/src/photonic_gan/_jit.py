"""Numba switch for the hot kernels.

Set ``PHOTONIC_GAN_NUMPY=1`` in the environment to route every kernel through
its vectorized numpy implementation instead of the ``@njit`` loops. The flag is
read once at import; :func:`use_numba` lets tests and the benchmark flip it.
"""
import os

try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_TRUTHY = {"1", "true", "yes", "on"}

USE_NUMBA = HAVE_NUMBA and os.environ.get("PHOTONIC_GAN_NUMPY", "").lower() not in _TRUTHY


def njit(*args, **kwargs):
    if HAVE_NUMBA:
        return nb.njit(*args, cache=True, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda func: func


def use_numba(flag=None):
    """Return the active backend flag, optionally setting it first."""
    global USE_NUMBA
    if flag is not None:
        USE_NUMBA = bool(flag) and HAVE_NUMBA
    return USE_NUMBA


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
