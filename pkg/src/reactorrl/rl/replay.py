"""Transitions and a ring-buffer experience replay."""

from __future__ import annotations

import math
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np


class Transition(NamedTuple):
    state: Any
    action: int
    reward: float
    next_state: Any
    done: bool


def check_transition(t: Transition, n_actions: int) -> None:
    if not math.isfinite(t.reward):
        raise ValueError(f"non-finite reward {t.reward!r}")
    if not 0 <= t.action < n_actions:
        raise ValueError(f"action {t.action} outside 0..{n_actions - 1}")


class EmptyBufferError(LookupError):
    pass


class ReplayBuffer:
    """Fixed-capacity ring of transitions with optional priority weights.

    ``pointer`` is the next write slot and always equals ``inserts % capacity``.
    Sampling is uniform with replacement, or proportional to the stored
    priorities when ``prioritized`` is set.
    """

    def __init__(self, capacity: int, prioritized: bool = False) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.items: list[Any] = []
        self.pointer = 0
        self.inserts = 0
        self.overwrites = 0
        self.priorities: np.ndarray | None = np.zeros(capacity) if prioritized else None

    def __len__(self) -> int:
        return len(self.items)

    @property
    def prioritized(self) -> bool:
        return self.priorities is not None

    def append(self, batch: Iterable[Any], priorities: Sequence[float] | None = None) -> None:
        batch = list(batch)
        if not batch:
            return
        if priorities is not None:
            if self.priorities is None:
                raise ValueError("priorities given to a uniform buffer")
            if len(priorities) != len(batch):
                raise ValueError("one priority per item required")
            if any(p < 0 or not math.isfinite(p) for p in priorities):
                raise ValueError("priorities must be finite and non-negative")
        cap = self.capacity
        items = self.items
        for k, item in enumerate(batch):
            p = self.pointer
            if len(items) < cap:
                items.append(item)
            else:
                items[p] = item
                self.overwrites += 1
            if self.priorities is not None:
                self.priorities[p] = 1.0 if priorities is None else priorities[k]
            self.pointer = (p + 1) % cap
        self.inserts += len(batch)

    def set_priorities(self, indices: Sequence[int], priorities: Sequence[float]) -> None:
        if self.priorities is None:
            raise ValueError("buffer is not prioritized")
        self.priorities[np.asarray(indices)] = priorities

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        n = len(self.items)
        if n == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        if self.priorities is None:
            return rng.integers(0, n, size=batch_size)
        w = self.priorities[:n]
        total = w.sum()
        if not total > 0:
            raise ValueError("priority weights sum to zero")
        return rng.choice(n, size=batch_size, p=w / total)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Any]:
        items = self.items
        return [items[i] for i in self.sample_indices(batch_size, rng).tolist()]
