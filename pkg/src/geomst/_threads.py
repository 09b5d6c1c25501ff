"""Thread-count plumbing shared by every parallel kernel.

This module must be imported before numba so the thread cap can be raised
above the machine's core count: reproducibility checks exercise thread
counts up to 8 regardless of the host, and numba rejects set_num_threads
values above the cap it read at import time.
"""

import os

_MIN_CAP = 8

if "NUMBA_NUM_THREADS" not in os.environ:
    os.environ["NUMBA_NUM_THREADS"] = str(max(os.cpu_count() or 1, _MIN_CAP))

import numba  # noqa: E402  (the env var above must be set first)


def max_threads() -> int:
    """Largest value accepted by :func:`set_threads` in this process."""
    return int(numba.config.NUMBA_NUM_THREADS)


def set_threads(n: int) -> int:
    """Set the worker count, clamped into [1, max_threads()].

    Returns the value actually applied. All parallel kernels in this
    package produce identical output for any worker count, so clamping
    never changes results, only timings.
    """
    n = max(1, min(int(n), max_threads()))
    numba.set_num_threads(n)
    return n


def get_threads() -> int:
    """Worker count currently in effect."""
    return int(numba.get_num_threads())
