"""Tabular and linear Q-functions trained by one-step Q-learning.

:func:`learner_update` vectorizes a batch but stays exactly equal to applying
the transitions one after another: targets come from the frozen target table,
so only repeated ``(state, action)`` pairs interact, and those are applied in
rounds ordered by their occurrence within the batch.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .replay import Transition


class DivergenceError(FloatingPointError):
    """An update produced NaN or infinity."""


@dataclass
class QTable:
    table: np.ndarray
    alpha: float = 0.1
    gamma: float = 0.9
    sync_every: int = 1
    target: np.ndarray = field(default=None)  # type: ignore[assignment]
    visits: np.ndarray = field(default=None)  # type: ignore[assignment]
    updates: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError(f"learning rate must be in (0, 1], got {self.alpha}")
        if self.sync_every < 1:
            raise ValueError("sync_every must be >= 1")
        self.table = np.asarray(self.table, dtype=np.float64)
        if self.target is None:
            self.target = self.table.copy()
        if self.visits is None:
            self.visits = np.zeros(self.table.shape, dtype=np.int64)
        if self.target.shape != self.table.shape:
            raise ValueError("target table shape differs from the main table")

    @classmethod
    def zeros(cls, n_states: int, n_actions: int, **kw) -> QTable:
        return cls(np.zeros((n_states, n_actions)), **kw)

    @property
    def n_actions(self) -> int:
        return self.table.shape[1]

    def snapshot(self) -> np.ndarray:
        """Read-only copy safe to hand to other reactors."""
        snap = self.table.copy()
        snap.flags.writeable = False
        return snap

    def param_hash(self) -> str:
        return hashlib.blake2b(self.table.tobytes(), digest_size=16).hexdigest()


def _columns(batch: Sequence[Transition]) -> tuple[np.ndarray, ...]:
    s, a, r, s2, d = zip(*batch)
    return (np.fromiter(s, np.int64, len(batch)), np.fromiter(a, np.int64, len(batch)),
            np.fromiter(r, np.float64, len(batch)), np.fromiter(s2, np.int64, len(batch)),
            np.fromiter(d, np.float64, len(batch)))


def occurrence_rank(keys: np.ndarray) -> np.ndarray:
    """For each position, how many earlier positions hold the same key."""
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    starts = np.r_[0, np.flatnonzero(sorted_keys[1:] != sorted_keys[:-1]) + 1]
    group_start = np.repeat(starts, np.diff(np.r_[starts, len(keys)]))
    rank = np.empty(len(keys), dtype=np.int64)
    rank[order] = np.arange(len(keys)) - group_start
    return rank


def learner_update(q: QTable, batch: Sequence[Transition]) -> QTable:
    """One Q-learning pass over ``batch`` in order; updates ``q`` in place."""
    if not batch:
        raise ValueError("empty batch")
    s, a, r, s2, done = _columns(batch)
    y = r + q.gamma * (1.0 - done) * q.target[s2].max(axis=1)
    if not np.all(np.isfinite(y)):
        raise DivergenceError("non-finite Q-learning target")
    table, alpha = q.table, q.alpha
    rank = occurrence_rank(s * q.n_actions + a)
    if rank.max(initial=0) == 0:
        cur = table[s, a]
        table[s, a] = cur + alpha * (y - cur)
    else:
        for k in range(int(rank.max()) + 1):
            m = rank == k
            sk, ak = s[m], a[m]
            cur = table[sk, ak]
            table[sk, ak] = cur + alpha * (y[m] - cur)
    np.add.at(q.visits, (s, a), 1)
    if not np.all(np.isfinite(table[s, a])):
        raise DivergenceError("Q-table diverged")
    q.updates += 1
    if q.updates % q.sync_every == 0:
        q.target[...] = table
    return q


def greedy(table: np.ndarray, state: int) -> int:
    row = table[state]
    return int(row.argmax())


class LinearQ:
    """Linear Q-function over block-averaged image features.

    An 80x80 frame is averaged over ``block`` x ``block`` tiles and scaled to
    [0, 1]; Q(s, a) = features(s) @ W[:, a] + b[a].
    """

    def __init__(self, n_actions: int, side: int = 80, block: int = 8,
                 alpha: float = 0.01, gamma: float = 0.9, sync_every: int = 1) -> None:
        if side % block:
            raise ValueError("block must divide the frame side")
        self.block = block
        self.side = side
        n_feat = (side // block) ** 2
        self.weights = np.zeros((n_feat, n_actions))
        self.bias = np.zeros(n_actions)
        self.target_weights = self.weights.copy()
        self.target_bias = self.bias.copy()
        self.alpha = alpha
        self.gamma = gamma
        self.sync_every = sync_every
        self.updates = 0

    @property
    def n_actions(self) -> int:
        return self.weights.shape[1]

    def features(self, frames: np.ndarray) -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float64)
        lead = frames.shape[:-2]
        k = self.side // self.block
        tiles = frames.reshape(*lead, k, self.block, k, self.block).mean(axis=(-3, -1))
        return tiles.reshape(*lead, k * k) / 255.0

    def values(self, frame: np.ndarray) -> np.ndarray:
        return self.features(frame) @ self.weights + self.bias

    def act(self, frame: np.ndarray) -> int:
        return int(self.values(frame).argmax())

    def update(self, batch: Sequence[Transition]) -> None:
        """Semi-gradient Q-learning, one transition at a time in batch order."""
        if not batch:
            raise ValueError("empty batch")
        s, a, r, s2, d = zip(*batch)
        phi = self.features(np.stack(s))
        phi2 = self.features(np.stack(s2))
        nxt = (phi2 @ self.target_weights + self.target_bias).max(axis=1)
        y = np.asarray(r) + self.gamma * (1.0 - np.asarray(d, dtype=np.float64)) * nxt
        for i, act in enumerate(a):
            err = y[i] - (phi[i] @ self.weights[:, act] + self.bias[act])
            self.weights[:, act] += self.alpha * err * phi[i]
            self.bias[act] += self.alpha * err
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise DivergenceError("linear Q weights diverged")
        self.updates += 1
        if self.updates % self.sync_every == 0:
            self.target_weights[...] = self.weights
            self.target_bias[...] = self.bias

    def param_hash(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(self.weights.tobytes())
        h.update(self.bias.tobytes())
        return h.hexdigest()

    def snapshot(self) -> LinearPolicy:
        return LinearPolicy(self.weights.copy(), self.bias.copy(), self.block, self.side)


@dataclass(frozen=True)
class LinearPolicy:
    """Frozen linear Q parameters, as sent to rollouts."""

    weights: np.ndarray
    bias: np.ndarray
    block: int = 8
    side: int = 80

    def act(self, frame: np.ndarray) -> int:
        k = self.side // self.block
        phi = np.asarray(frame, dtype=np.float64).reshape(k, self.block, k, self.block).mean(axis=(1, 3))
        return int((phi.reshape(-1) / 255.0 @ self.weights + self.bias).argmax())

    @staticmethod
    def average(policies: Sequence[LinearPolicy]) -> LinearPolicy:
        p0 = policies[0]
        return LinearPolicy(np.mean([p.weights for p in policies], axis=0),
                            np.mean([p.bias for p in policies], axis=0), p0.block, p0.side)


def average_params(params: Sequence[object]) -> object:
    """Element-wise mean of parameter snapshots (tables or linear policies)."""
    if isinstance(params[0], np.ndarray):
        return np.mean(np.stack(params), axis=0)
    return LinearPolicy.average(params)  # type: ignore[arg-type]


def make_model(env, alpha: float, gamma: float, sync_every: int):
    """Tabular Q for discrete environments, linear Q for image observations."""
    if env.n_states is not None:
        return QTable.zeros(env.n_states, env.n_actions, alpha=alpha, gamma=gamma, sync_every=sync_every)
    return LinearQ(env.n_actions, alpha=min(alpha, 0.01), gamma=gamma, sync_every=sync_every)


def update_model(model, batch: Sequence[Transition]) -> None:
    if isinstance(model, QTable):
        learner_update(model, batch)
    else:
        model.update(batch)
