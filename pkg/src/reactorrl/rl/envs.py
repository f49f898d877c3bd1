"""Small deterministic environments.

Every environment owns a ``random.Random`` stream reseeded by ``reset(seed)``;
given the seed the whole episode is reproducible. Scalar draws from the stdlib
generator cost a fraction of a microsecond, far less than numpy's per-call
overhead, which keeps environment cost small next to coordination cost. Tabular environments expose
integer observations in ``range(n_states)``.
"""

from __future__ import annotations

import random
from typing import Any, Sequence

import numpy as np


class UnknownEnvironment(KeyError):
    pass


class EpisodeDone(RuntimeError):
    """``step`` was called on a finished episode."""


class Environment:
    name: str = ""
    n_actions: int = 0
    n_states: int | None = None  # None for non-tabular observations
    n_agents: int = 1

    def __init__(self) -> None:
        self.rng = random.Random(0)
        self.done = True

    def reset(self, seed: int | None = None) -> Any:
        if seed is not None:
            self.rng = random.Random(seed)
        self.done = False
        return self._reset()

    def step(self, action: Any) -> tuple[Any, Any, bool]:
        if self.done:
            raise EpisodeDone(f"{self.name}: step after the episode ended; call reset()")
        obs, reward, done = self._step(action)
        self.done = done
        return obs, reward, done

    def _check_action(self, a: int) -> int:
        a = int(a)
        if not 0 <= a < self.n_actions:
            raise ValueError(f"{self.name}: action {a} outside 0..{self.n_actions - 1}")
        return a

    def _reset(self) -> Any:
        raise NotImplementedError

    def _step(self, action: Any) -> tuple[Any, Any, bool]:
        raise NotImplementedError


# -- blackjack ----------------------------------------------------------------

STICK, HIT = 0, 1

# infinite deck: ace=1, 2..9, and four ten-valued ranks
_DECK = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 10, 10, 10)


def hand_value(cards: Sequence[int]) -> tuple[int, bool]:
    """(best total, usable ace)."""
    total = sum(cards)
    if 1 in cards and total + 10 <= 21:
        return total + 10, True
    return total, False


def blackjack_state(player_sum: int, dealer_card: int, usable_ace: bool) -> int:
    return (player_sum * 11 + dealer_card) * 2 + int(usable_ace)


class Blackjack(Environment):
    """Infinite-deck blackjack; the dealer draws to 17 and stands on every 17.

    Observation is ``blackjack_state(player_sum, dealer_showing, usable_ace)``.
    Reaching exactly 21 by hitting stands automatically. Rewards: +1 win,
    0 draw, -1 loss.
    """

    name = "blackjack"
    n_actions = 2
    n_states = 32 * 11 * 2

    def _draw(self) -> int:
        return _DECK[int(self.rng.random() * 13)]

    def _obs(self) -> int:
        total, ace = hand_value(self.player)
        return blackjack_state(total, self.dealer[0], ace)

    def _reset(self) -> int:
        self.player = [self._draw(), self._draw()]
        self.dealer = [self._draw(), self._draw()]
        return self._obs()

    def _dealer_plays(self) -> float:
        while hand_value(self.dealer)[0] < 17:
            self.dealer.append(self._draw())
        player, _ = hand_value(self.player)
        dealer, _ = hand_value(self.dealer)
        if dealer > 21 or player > dealer:
            return 1.0
        return 0.0 if player == dealer else -1.0

    def _step(self, action: int) -> tuple[int, float, bool]:
        a = self._check_action(action)
        if a == HIT:
            self.player.append(self._draw())
            total, _ = hand_value(self.player)
            if total > 21:
                return self._obs(), -1.0, True
            if total < 21:
                return self._obs(), 0.0, False
        return self._obs(), self._dealer_plays(), True


# -- gridworld ----------------------------------------------------------------

_MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))  # up, right, down, left


class GridWorld(Environment):
    """Square grid, start top-left, goal bottom-right, +1 on reaching it."""

    name = "gridworld"
    n_actions = 4

    def __init__(self, size: int = 5, max_steps: int = 100) -> None:
        super().__init__()
        self.size = size
        self.max_steps = max_steps
        self.n_states = size * size
        self.goal = (size - 1, size - 1)

    @property
    def shortest_path(self) -> int:
        return 2 * (self.size - 1)

    def _reset(self) -> int:
        self.pos = (0, 0)
        self.t = 0
        return 0

    def _step(self, action: int) -> tuple[int, float, bool]:
        dr, dc = _MOVES[self._check_action(action)]
        r = min(max(self.pos[0] + dr, 0), self.size - 1)
        c = min(max(self.pos[1] + dc, 0), self.size - 1)
        self.pos = (r, c)
        self.t += 1
        obs = r * self.size + c
        if self.pos == self.goal:
            return obs, 1.0, True
        return obs, 0.0, self.t >= self.max_steps


# -- image80 ------------------------------------------------------------------

class Image80(Environment):
    """Synthetic catch game rendered as an 80x80 uint8 frame.

    A ball falls one row per step; a paddle on the bottom row moves left,
    stays or moves right. Catching the ball earns +1, missing it -1, and a
    new ball spawns until ``balls`` have fallen.
    """

    name = "image80"
    n_actions = 3
    side = 80
    _BALL = 4
    _PADDLE = 12

    def __init__(self, balls: int = 3, rows_per_step: int = 4) -> None:
        super().__init__()
        self.balls = balls
        self.rows_per_step = rows_per_step
        background = np.zeros((self.side, self.side), dtype=np.uint8)
        background[::8, :] = 16  # faint grid so frames are not all-zero
        self._background = background

    def _spawn(self) -> None:
        self.ball_x = self.rng.randrange(self.side - self._BALL)
        self.ball_y = 0

    def _frame(self) -> np.ndarray:
        f = self._background.copy()
        b = self._BALL
        f[self.ball_y:self.ball_y + b, self.ball_x:self.ball_x + b] = 255
        f[self.side - 2:, self.paddle:self.paddle + self._PADDLE] = 128
        return f

    def _reset(self) -> np.ndarray:
        self.paddle = (self.side - self._PADDLE) // 2
        self.fallen = 0
        self._spawn()
        return self._frame()

    def _step(self, action: int) -> tuple[np.ndarray, float, bool]:
        a = self._check_action(action)
        self.paddle = min(max(self.paddle + (a - 1) * 4, 0), self.side - self._PADDLE)
        self.ball_y += self.rows_per_step
        reward = 0.0
        done = False
        if self.ball_y >= self.side - 2 - self._BALL:
            centre = self.ball_x + self._BALL // 2
            reward = 1.0 if self.paddle <= centre < self.paddle + self._PADDLE else -1.0
            self.fallen += 1
            if self.fallen >= self.balls:
                done = True
            else:
                self._spawn()
        return self._frame(), reward, done


# -- traffic junction -----------------------------------------------------------

BRAKE, GAS = 0, 1
ROAD_LENGTH = 7
JUNCTION = 3
WAITING = -1
EXITED = ROAD_LENGTH


def _cell(road: int, pos: int) -> int:
    """Cell key; the two roads share only the junction cell."""
    return -1 if pos == JUNCTION else road * ROAD_LENGTH + pos


class TrafficJunction(Environment):
    """Two one-way roads of seven cells crossing at a shared junction cell.

    Agents alternate between roads and enter at staggered steps once their
    entry cell is free. Each step every active agent picks brake or gas.
    Two agents in one cell is a collision: each involved agent gets
    ``collision_reward`` and the episode ends. Leaving the far end pays
    ``pass_reward``; every active agent pays ``step_reward`` each step.

    The local observation of an agent encodes its position (waiting, on road,
    exited), whether the cell ahead is occupied and whether a car on the
    other road sits one cell before the junction or in it.

    Car state lives in flat lists (``road``, ``spawn``, ``pos``); road 0 runs
    west to east and road 1 north to south.
    """

    name = "traffic-junction"
    n_actions = 2
    collision_reward = -10.0
    pass_reward = 1.0
    step_reward = -0.01

    def __init__(self, n_agents: int = 4, spawn_gap: int = 2, max_steps: int = 40) -> None:
        super().__init__()
        if n_agents < 1:
            raise ValueError("traffic junction needs at least one agent")
        self.n_agents = n_agents
        self.spawn_gap = spawn_gap
        self.max_steps = max_steps
        self.n_states = (ROAD_LENGTH + 2) * 4
        self.road = [i % 2 for i in range(n_agents)]

    def _reset(self) -> list[int]:
        self.t = 0
        jitter = [self.rng.randrange(2) for _ in range(self.n_agents)]
        self.spawn = [(i // 2) * self.spawn_gap + jitter[i] for i in range(self.n_agents)]
        self.pos = [WAITING] * self.n_agents
        cells = self._occupied()
        self._admit(cells)
        return self.observations(cells)

    def _occupied(self) -> dict[int, list[int]]:
        cells: dict[int, list[int]] = {}
        i = 0
        for r, p in zip(self.road, self.pos):
            if 0 <= p < ROAD_LENGTH:
                key = -1 if p == JUNCTION else r * ROAD_LENGTH + p  # inlined _cell
                ids = cells.get(key)
                if ids is None:
                    cells[key] = [i]
                else:
                    ids.append(i)
            i += 1
        return cells

    def _admit(self, cells: dict[int, list[int]]) -> None:
        """Let waiting cars whose spawn step has come enter a free entry cell; updates ``cells``."""
        pos = self.pos
        for i in range(self.n_agents):
            if pos[i] == WAITING and self.spawn[i] <= self.t:
                entry = _cell(self.road[i], 0)
                if entry not in cells:
                    pos[i] = 0
                    cells[entry] = [-1]

    def observations(self, cells: dict[int, list[int]] | None = None) -> list[int]:
        if cells is None:
            cells = self._occupied()
        road, pos = self.road, self.pos
        # roads with a car one cell before the junction or in it
        near = [False, False]
        for r, p in zip(road, pos):
            if p == JUNCTION - 1 or p == JUNCTION:
                near[r] = True
        obs = []
        for r, p in zip(road, pos):
            if 0 <= p < ROAD_LENGTH:
                q = p + 1
                ahead = q < ROAD_LENGTH and (-1 if q == JUNCTION else r * ROAD_LENGTH + q) in cells
                # slot p + 1 on road; 0 is waiting and 8 exited
                obs.append(((p + 1) * 2 + ahead) * 2 + near[1 - r])
            else:
                obs.append((min(p, EXITED) + 1) * 4)
        return obs

    def place(self, positions: Sequence[int]) -> list[int]:
        """Put cars at explicit positions (tests and scripted scenarios)."""
        if len(positions) != self.n_agents:
            raise ValueError(f"expected {self.n_agents} positions, got {len(positions)}")
        self.pos = list(positions)
        return self.observations()

    def _step(self, actions: Sequence[int]) -> tuple[list[int], list[float], bool]:
        n = self.n_agents
        if len(actions) != n:
            raise ValueError(f"expected {n} actions, got {len(actions)}")
        pos = self.pos
        for i, a in enumerate(actions):
            if a != GAS and a != BRAKE:
                a = self._check_action(a)
            if a == GAS and 0 <= pos[i] < ROAD_LENGTH:
                pos[i] += 1
        self.t += 1
        cells = self._occupied()
        collided = [i for ids in cells.values() if len(ids) > 1 for i in ids]
        rewards = [0.0] * n
        for i in range(n):
            p = pos[i]
            if 0 <= p < ROAD_LENGTH:
                rewards[i] += self.step_reward
            elif p == EXITED:
                rewards[i] += self.pass_reward
                pos[i] = EXITED + 1  # paid once
        for i in collided:
            rewards[i] = self.collision_reward
        if collided:
            return self.observations(cells), rewards, True
        self._admit(cells)
        finished = all(p > EXITED for p in pos)
        return self.observations(cells), rewards, finished or self.t >= self.max_steps


_REGISTRY = {
    "blackjack": Blackjack,
    "gridworld": GridWorld,
    "image80": Image80,
    "traffic-junction": TrafficJunction,
}


def make_env(name: str, **kwargs: Any) -> Environment:
    """Build an environment by name; ``traffic-junction:4`` sets the agent count."""
    base, _, arg = name.partition(":")
    cls = _REGISTRY.get(base)
    if cls is None:
        raise UnknownEnvironment(f"unknown environment {name!r}; choose from {sorted(_REGISTRY)}")
    if arg:
        kwargs.setdefault("n_agents", int(arg))
    return cls(**kwargs)


def env_names() -> list[str]:
    return sorted(_REGISTRY)
