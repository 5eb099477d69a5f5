"""Kernel backend selection and thread-count control.

Hot numeric kernels ship in two flavours: numba ``@njit`` loops and a
vectorized pure-numpy path.  The numpy path is selected by setting the
environment variable ``GROUPLOSS_NO_NUMBA`` (any non-empty value other
than ``0``), or automatically when numba is not importable.  The flag is
read once at import time.

``GROUPLOSS_THREADS`` caps the number of worker threads used for
per-bin computations (default: number of CPUs, at most 8).
"""

import os


def _env_flag(name: str) -> bool:
    value = os.environ.get(name, "")
    return value not in ("", "0", "false", "False")


_DISABLED = _env_flag("GROUPLOSS_NO_NUMBA")

if not _DISABLED:
    try:
        from numba import njit as _njit
        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def maybe_njit(func):
    """Compile ``func`` with numba when the numba backend is active."""
    if USE_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    return func


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def thread_count() -> int:
    """Worker thread cap, from GROUPLOSS_THREADS or the CPU count."""
    raw = os.environ.get("GROUPLOSS_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"GROUPLOSS_THREADS must be an integer, got {raw!r}")
        if n < 1:
            raise ValueError("GROUPLOSS_THREADS must be >= 1")
        return n
    return min(os.cpu_count() or 1, 8)
