"""Epsilon-greedy rollouts that carry environment and policy state across calls."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .envs import Environment
from .replay import Transition


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear anneal from ``start`` to ``end`` over ``decay_steps`` environment steps."""

    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 10_000

    def __post_init__(self) -> None:
        for v in (self.start, self.end):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"epsilon {v} outside [0, 1]")

    def at(self, step: int) -> float:
        if self.decay_steps <= 0 or step >= self.decay_steps:
            return self.end
        return self.start + (self.end - self.start) * (step / self.decay_steps)

    @classmethod
    def constant(cls, eps: float) -> EpsilonSchedule:
        return cls(eps, eps, 0)


def greedy_action(params: Any, obs: Any) -> int:
    """Greedy action under ``params``: a Q table, or any object with ``act(obs)``."""
    if isinstance(params, np.ndarray):
        return int(params[obs].argmax())
    return int(params.act(obs))


@dataclass
class PolicyState:
    schedule: EpsilonSchedule
    rng: random.Random
    steps: int = 0

    @property
    def epsilon(self) -> float:
        return self.schedule.at(self.steps)


@dataclass
class RolloutWorker:
    """Steps one environment with an epsilon-greedy policy.

    Per-step scratch lives in the action/reward/observation buffers, which are
    cleared whenever an episode ends.
    """

    env: Environment
    policy: PolicyState
    seed: int = 0
    obs: Any = None
    episodes: int = 0
    episode_return: float = 0.0
    completed_returns: list[float] = field(default_factory=list)
    action_buffer: list[int] = field(default_factory=list)
    reward_buffer: list[float] = field(default_factory=list)
    observation_buffer: list[Any] = field(default_factory=list)

    @classmethod
    def create(cls, env: Environment, seed: int, schedule: EpsilonSchedule) -> RolloutWorker:
        w = cls(env=env, policy=PolicyState(schedule, random.Random(seed)), seed=seed)
        w.obs = env.reset(seed)
        return w

    def _end_episode(self) -> None:
        self.completed_returns.append(self.episode_return)
        self.episode_return = 0.0
        self.episodes += 1
        self.action_buffer.clear()
        self.reward_buffer.clear()
        self.observation_buffer.clear()
        self.obs = self.env.reset()

    def collect(self, params: Any, k: int) -> list[Transition]:
        """Run ``k`` environment steps, restarting episodes as they end."""
        env, pol = self.env, self.policy
        rng = pol.rng
        n_actions = env.n_actions
        out: list[Transition] = []
        obs = self.obs
        for _ in range(k):
            eps = pol.schedule.at(pol.steps)
            if params is None or rng.random() < eps:
                a = rng.randrange(n_actions)
            else:
                a = greedy_action(params, obs)
            nxt, reward, done = env.step(a)
            pol.steps += 1
            self.action_buffer.append(a)
            self.reward_buffer.append(reward)
            self.observation_buffer.append(nxt)
            self.episode_return += reward
            out.append(Transition(obs, a, reward, nxt, done))
            if done:
                self._end_episode()
                obs = self.obs
            else:
                obs = nxt
        self.obs = obs
        return out

    def drain_returns(self) -> list[float]:
        r, self.completed_returns = self.completed_returns, []
        return r


def evaluate_policy(env: Environment, params: Any, episodes: int, seed: int,
                    max_steps: int = 10_000) -> float:
    """Mean undiscounted return of the greedy policy (``params=None``: uniform random)."""
    rng = random.Random(seed)
    total = 0.0
    obs = env.reset(seed)
    for _ in range(episodes):
        ret = 0.0
        for _ in range(max_steps):
            a = rng.randrange(env.n_actions) if params is None else greedy_action(params, obs)
            obs, reward, done = env.step(a)
            ret += reward
            if done:
                break
        total += ret
        obs = env.reset()
    return total / episodes
