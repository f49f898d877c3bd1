"""Ready queue and worker admission.

The ready queue is a fixed-size buffer paired with a decrementing counter.
Staging writes ``n`` entries and publishes a counter starting at ``n - 1``;
each pop is one atomic decrement-and-fetch. A negative result means the
level is drained, a non-negative one is the caller's private buffer index.

On a GIL build the decrement is ``next()`` on an ``itertools.count`` object.
That call runs entirely in C without releasing the interpreter lock, so it is
atomic. Free-threaded builds fall back to a lock-guarded counter.
"""

from __future__ import annotations

import itertools
import sys
import threading
from typing import Callable, Generic, Sequence, TypeVar

T = TypeVar("T")

GIL_ENABLED: bool = getattr(sys, "_is_gil_enabled", lambda: True)()


def _empty() -> int:
    return -1


class _LockedCountdown:
    __slots__ = ("_value", "_lock")

    def __init__(self, start: int) -> None:
        self._value = start + 1
        self._lock = threading.Lock()

    def __call__(self) -> int:
        with self._lock:
            self._value -= 1
            return self._value


def countdown(n: int) -> Callable[[], int]:
    """Callable returning n-1, n-2, ..., 0, -1, -2, ... one value per call, atomically."""
    if GIL_ENABLED:
        return itertools.count(n - 1, -1).__next__
    return _LockedCountdown(n - 1)


class AtomicCounter:
    """Decrement-and-fetch counter; ``reset(n)`` re-arms it for ``n`` claims."""

    __slots__ = ("_dec",)

    def __init__(self, n: int = 0) -> None:
        self._dec = countdown(n)

    def reset(self, n: int) -> None:
        self._dec = countdown(n)

    def decrement(self) -> int:
        return self._dec()


class ReadyQueue(Generic[T]):
    """Fixed-capacity buffer of staged work handed out by an atomic counter.

    ``stage`` must only be called by the single worker currently acting as
    scheduler, and only once every entry of the previous stage was claimed.
    """

    __slots__ = ("capacity", "_buffer", "_take")

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("ready queue capacity must be >= 1")
        self.capacity = capacity
        self._buffer: list = [None] * capacity
        self._take: Callable[[], int] = _empty

    def stage(self, items: Sequence[T]) -> None:
        n = len(items)
        if n > self.capacity:
            raise ValueError(f"staging {n} items into a ready queue of capacity {self.capacity}")
        self._buffer[:n] = items
        # publish the counter last: readers that still hold the old one see it drained
        self._take = countdown(n)

    def claim(self) -> int:
        """Atomically claim an index; negative means empty."""
        return self._take()

    def pop(self, empty: T | None = None) -> T | None:
        i = self._take()
        if i < 0:
            return empty
        return self._buffer[i]

    def __getitem__(self, i: int) -> T:
        return self._buffer[i]

    @property
    def buffer(self) -> list:
        """The backing list; it is the same object for the queue's lifetime."""
        return self._buffer


class AdmissionGate:
    """Counting gate releasing at most a requested number of sleeping workers.

    ``admit(k)`` replaces any unconsumed permits with ``min(k, sleepers)``, so
    permits never pile up across levels and a worker that wakes to an
    already drained queue simply goes back to sleep.
    """

    def __init__(self) -> None:
        self._cond = threading.Condition(threading.Lock())
        self._permits = 0
        self._sleeping = 0
        self._closed = False

    @property
    def sleeping(self) -> int:
        return self._sleeping

    def wait(self) -> bool:
        """Block until admitted (True) or the gate closes (False)."""
        with self._cond:
            self._sleeping += 1
            try:
                while not self._permits and not self._closed:
                    self._cond.wait()
                if self._closed:
                    return False
                self._permits -= 1
                return True
            finally:
                self._sleeping -= 1

    def admit(self, k: int) -> int:
        if k <= 0 or not self._sleeping:
            return 0
        with self._cond:
            n = min(k, self._sleeping)
            self._permits = n
            if n:
                self._cond.notify(n)
            return n

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
