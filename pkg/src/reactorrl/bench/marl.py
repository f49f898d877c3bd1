"""Decentralized MARL inference time against episode count and agent count."""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from ..actors import ActorSystem
from ..rl.envs import TrafficJunction
from ..rl.marl import EpisodeStats, default_policies, greedy_lookup, run_episodes
from .report import BenchResult
from .stats import paused_gc

FAMILY = "marl-inference"


def actor_episodes(policies: Sequence[np.ndarray], episodes: int, seed: int) -> tuple[EpisodeStats, int]:
    """Same episodes as :func:`run_episodes`; agents are actors, observations and actions are copied."""
    n = len(policies)
    with ActorSystem() as system:
        def make_agent(table: np.ndarray):
            lookup = greedy_lookup(table)

            def act(obs, ctx):
                return lookup[obs]
            return act

        agents = [system.spawn(make_agent(p), name=f"agent-{i}") for i, p in enumerate(policies)]
        slot = {a.id: i for i, a in enumerate(agents)}
        inbox = system.inbox()
        env = TrafficJunction(n)
        stats = EpisodeStats()
        t0 = time.perf_counter_ns()
        for ep in range(episodes):
            obs = env.reset(seed + ep)
            ret = 0.0
            while True:
                for a, o in zip(agents, obs):
                    a.send(o, reply_to=inbox)
                joint = [0] * n
                for _ in range(n):
                    action, sender, _ = inbox.receive(timeout=60)
                    joint[slot[sender]] = action
                obs, rewards, done = env.step(joint)
                stats.steps += 1
                stats.actions_hash = hash((stats.actions_hash, tuple(joint)))
                ret += sum(rewards)
                if done:
                    break
            stats.episodes += 1
            stats.returns.append(ret)
        return stats, time.perf_counter_ns() - t0


def _run(runtime: str, policies, episodes: int, seed: int, workers: int) -> tuple[EpisodeStats, int]:
    with paused_gc():
        if runtime == "reactor":
            return run_episodes(policies, episodes, seed, workers=workers)
        return actor_episodes(policies, episodes, seed)


def bench_marl(*, agents: list[int], episodes: list[int], reps: int = 3, warmup: int = 1,
               workers: int = 8, seed: int = 42, sweep: str = "episodes",
               runtimes=("reactor", "actor")) -> list[BenchResult]:
    """``sweep="episodes"`` varies episodes at ``agents[0]``; ``sweep="agents"`` varies agents at ``episodes[0]``."""
    if reps < 3:
        raise ValueError("at least 3 repetitions")
    if not agents or not episodes:
        raise ValueError("empty sweep")
    if sweep == "episodes":
        points = [(agents[0], e) for e in episodes]
    elif sweep == "agents":
        points = [(a, episodes[0]) for a in agents]
    else:
        raise ValueError(f"unknown sweep {sweep!r}")
    results = []
    for n, e in points:
        policies = default_policies(n, seed)
        walls: dict[str, list[int]] = {r: [] for r in runtimes}
        work: dict[str, tuple[int, int]] = {}
        for rep in range(reps + warmup):
            for runtime in runtimes:
                stats, wall = _run(runtime, policies, e, seed, min(workers, n) if runtime == "reactor" else n)
                if rep >= warmup:
                    walls[runtime].append(wall)
                work[runtime] = (stats.steps, stats.actions_hash)
        if len(set(work.values())) > 1:
            raise RuntimeError(f"agents={n} episodes={e}: runtimes executed different work {work}")
        for runtime in runtimes:
            results.append(BenchResult(
                FAMILY, runtime, sweep, e if sweep == "episodes" else n, walls[runtime],
                "inference_ms", [w / 1e6 for w in walls[runtime]], seed,
                min(workers, n) if runtime == "reactor" else n, warmup,
                notes={"agents": n, "episodes": e, "steps": work[runtime][0]}))
    return results
