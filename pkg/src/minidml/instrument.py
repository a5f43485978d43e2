"""Allocation instrumentation for matrix payloads.

While a :class:`MemoryTracker` is active every ``Matrix`` constructed registers
its payload bytes and releases them when garbage collected. Kernels may also
report short-lived scratch buffers (e.g. im2col patch matrices) through
:func:`scratch`. The tracker records the peak of live bytes.
"""

from __future__ import annotations

import threading
import weakref
from contextlib import contextmanager

_lock = threading.Lock()
_active: list["MemoryTracker"] = []


class MemoryTracker:
    def __init__(self):
        self.live = 0
        self.peak = 0
        self.allocations = 0

    def _add(self, nbytes):
        self.live += nbytes
        self.allocations += 1
        if self.live > self.peak:
            self.peak = self.live

    def _sub(self, nbytes):
        self.live -= nbytes

    def __enter__(self):
        with _lock:
            _active.append(self)
        return self

    def __exit__(self, *exc):
        with _lock:
            _active.remove(self)
        return False


def _release(trackers, nbytes):
    with _lock:
        for t in trackers:
            t._sub(nbytes)


def on_alloc(obj, nbytes: int) -> None:
    if not _active:
        return
    with _lock:
        trackers = tuple(_active)
        for t in trackers:
            t._add(nbytes)
    weakref.finalize(obj, _release, trackers, nbytes)


@contextmanager
def scratch(nbytes: int):
    """Account a temporary buffer for the duration of the block."""
    if not _active:
        yield
        return
    with _lock:
        trackers = tuple(_active)
        for t in trackers:
            t._add(nbytes)
    try:
        yield
    finally:
        _release(trackers, nbytes)
