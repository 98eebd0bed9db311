"""Numba switch for the hot kernels.

Set ``RHOPOMCPOW_NO_JIT=1`` in the environment to run every kernel through its
pure-numpy / pure-python path. The flag is read once, at import time.
"""
import os

_FLAG = os.environ.get("RHOPOMCPOW_NO_JIT", "").strip().lower()
JIT_DISABLED = _FLAG in {"1", "true", "yes", "on"}

try:
    import numba
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

JIT_ENABLED = NUMBA_AVAILABLE and not JIT_DISABLED


def jit(fn):
    """Compile ``fn`` with numba when available, regardless of the env flag."""
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if JIT_ENABLED else "numpy"
