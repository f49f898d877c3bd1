"""Superdense logical time.

A :class:`Tag` is a ``(time, microstep)`` pair. ``time`` counts integer
nanoseconds since program start; ``microstep`` orders events that share a
time value. Tags are tuples, so comparison, hashing and heap ordering all use
the native lexicographic tuple order.
"""

from __future__ import annotations

import enum
import time as _time
from dataclasses import dataclass

NSEC = 1
USEC = 1_000
MSEC = 1_000_000
SEC = 1_000_000_000

MAX_TIME = 2**63 - 1
MAX_MICROSTEP = 2**32 - 1


class TagOverflowError(OverflowError):
    """Raised when a tag leaves the representable range (program lifetime exceeded)."""


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


class Tag(tuple):
    """A point in superdense logical time."""

    __slots__ = ()

    def __new__(cls, time: int = 0, microstep: int = 0) -> Tag:
        if time < 0 or microstep < 0:
            raise ValueError(f"tag fields must be non-negative, got ({time}, {microstep})")
        if time > MAX_TIME:
            raise TagOverflowError(f"tag time {time} exceeds program lifetime")
        if microstep > MAX_MICROSTEP:
            raise TagOverflowError(f"microstep {microstep} exceeds 32 bits")
        return tuple.__new__(cls, (time, microstep))

    @property
    def time(self) -> int:
        return self[0]

    @property
    def microstep(self) -> int:
        return self[1]

    def __repr__(self) -> str:
        return f"Tag({self[0]}, {self[1]})"

    def __str__(self) -> str:
        return f"{self[0]}:{self[1]}"

    def __getnewargs__(self):
        return (self[0], self[1])

    @classmethod
    def parse(cls, text: str) -> Tag:
        """Inverse of ``str(tag)``: ``"5000000:1"`` -> ``Tag(5000000, 1)``."""
        time, sep, micro = text.partition(":")
        if not sep:
            raise ValueError(f"malformed tag {text!r}")
        return cls(int(time), int(micro))

    def next_microstep(self) -> Tag:
        return Tag(self[0], self[1] + 1)

    def after(self, delay: LogicalDelay | int) -> Tag:
        return tag_after_delay(self, delay)


STARTUP_TAG = Tag(0, 0)


@dataclass(frozen=True)
class LogicalDelay:
    """A non-negative logical delay. Zero means "next microstep"."""

    nanos: int = 0

    def __post_init__(self) -> None:
        if self.nanos < 0:
            raise ValueError(f"delay must be non-negative, got {self.nanos}")

    @property
    def kind(self) -> str:
        return "zero" if self.nanos == 0 else "strict-positive"

    @property
    def is_zero(self) -> bool:
        return self.nanos == 0

    def __add__(self, other: LogicalDelay | int) -> LogicalDelay:
        return LogicalDelay(self.nanos + as_nanos(other))

    @classmethod
    def ms(cls, value: float) -> LogicalDelay:
        return cls(int(round(value * MSEC)))

    @classmethod
    def us(cls, value: float) -> LogicalDelay:
        return cls(int(round(value * USEC)))


ZERO_DELAY = LogicalDelay(0)


def as_nanos(delay: LogicalDelay | int | None) -> int:
    if delay is None:
        return 0
    if isinstance(delay, LogicalDelay):
        return delay.nanos
    if delay < 0:
        raise ValueError(f"delay must be non-negative, got {delay}")
    return int(delay)


def tag_compare(a: Tag, b: Tag) -> Ordering:
    if a < b:
        return Ordering.LESS
    if a > b:
        return Ordering.GREATER
    return Ordering.EQUAL


_new_tuple = tuple.__new__


def tag_after_delay(t: Tag, d: LogicalDelay | int) -> Tag:
    """Tag reached from ``t`` after logical delay ``d``.

    A positive delay lands on microstep 0 of the later time; a zero delay
    bumps the microstep.
    """
    nanos = d if type(d) is int and d >= 0 else as_nanos(d)
    # fields are known valid here, so skip the constructor's checks
    if nanos == 0:
        if t[1] >= MAX_MICROSTEP:
            raise TagOverflowError(f"microstep after {t} exceeds 32 bits")
        return _new_tuple(Tag, (t[0], t[1] + 1))
    if t[0] + nanos > MAX_TIME:
        raise TagOverflowError(f"{t} + {nanos}ns exceeds program lifetime")
    return _new_tuple(Tag, (t[0] + nanos, 0))


class PhysicalClock:
    """Monotone wall clock reading nanoseconds relative to a start instant."""

    __slots__ = ("_origin",)

    def __init__(self) -> None:
        self._origin = _time.monotonic_ns()

    def restart(self) -> None:
        self._origin = _time.monotonic_ns()

    @property
    def origin_ns(self) -> int:
        return self._origin

    def now(self) -> int:
        return _time.monotonic_ns() - self._origin


def physical_tag(nanos: int) -> Tag:
    return Tag(max(0, nanos), 0)
