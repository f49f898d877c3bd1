"""Tag-ordered event queue.

Events are grouped by tag: the heap holds each distinct tag once and a dict
maps the tag to ``{trigger: value}``. Popping releases every event at the
minimal tag together. A second event for the same trigger at the same tag
replaces the first one's value.
"""

from __future__ import annotations

import heapq
from typing import Any, Hashable

from ..tags import Tag


class LateEventError(ValueError):
    """An event was pushed at or before a tag that was already released."""


class EventQueue:
    """Not thread-safe; the runtime serializes access."""

    __slots__ = ("_heap", "_slots", "_floor", "enqueued", "replaced")

    def __init__(self) -> None:
        self._heap: list[Tag] = []
        self._slots: dict[Tag, dict[Hashable, Any]] = {}
        self._floor: Tag | None = None
        self.enqueued = 0
        self.replaced = 0

    def push(self, tag: Tag, trigger: Hashable, value: Any = None) -> bool:
        """Insert an event; returns True if it replaced one at the same tag."""
        if self._floor is not None and tag <= self._floor:
            raise LateEventError(f"event at {tag} is not after released tag {self._floor}")
        slot = self._slots.get(tag)
        if slot is None:
            self._slots[tag] = {trigger: value}
            heapq.heappush(self._heap, tag)
            self.enqueued += 1
            return False
        replaced = trigger in slot
        slot[trigger] = value
        if replaced:
            self.replaced += 1
        else:
            self.enqueued += 1
        return replaced

    def peek(self) -> Tag | None:
        return self._heap[0] if self._heap else None

    def pop(self) -> tuple[Tag, dict[Hashable, Any]]:
        tag = heapq.heappop(self._heap)
        self._floor = tag
        return tag, self._slots.pop(tag)

    def advance_floor(self, tag: Tag) -> None:
        """Mark ``tag`` as released even if no event was queued at it."""
        if self._floor is None or tag > self._floor:
            self._floor = tag

    @property
    def floor(self) -> Tag | None:
        return self._floor

    def count_after(self, tag: Tag) -> int:
        return sum(len(s) for t, s in self._slots.items() if t > tag)

    def __len__(self) -> int:
        return sum(len(s) for s in self._slots.values())

    def __bool__(self) -> bool:
        return bool(self._heap)
