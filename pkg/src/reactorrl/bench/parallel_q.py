"""Synchronized parallel Q-learning on both runtimes.

Both sides run ``banks`` rollout/replay/learner pipelines with the same seeds
and the same reaction code paths (:class:`RolloutWorker`, :class:`ReplayBuffer`,
:func:`update_model`). On the actor side each role is an actor holding its
peer's address, mirroring actor handles: learner -> rollout -> replay ->
learner, with every hop pickled.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import numpy as np

from ..actors import ActorSystem
from ..graph import compile_program
from ..rl.config import RLConfig
from ..rl.dataflow import appendix_program, bank_seeds, evaluate, run_pipeline
from ..rl.envs import make_env
from ..rl.qtable import make_model, update_model
from ..rl.replay import ReplayBuffer
from ..rl.rollout import RolloutWorker
from .report import BenchResult
from .stats import paused_gc

FAMILY = "parallel-q"


@dataclass
class ActorPipelineResult:
    wall_ns: int
    param_hashes: list[list[str]]
    models: list[object]
    env_steps: int


def run_actor_pipeline(cfg: RLConfig, timeout: float = 600.0) -> ActorPipelineResult:
    if cfg.averaging:
        raise ValueError("the actor pipeline implements independent learners only")
    done = threading.Event()
    remaining = [cfg.banks]
    lock = threading.Lock()
    learners_state: list[dict] = [{} for _ in range(cfg.banks)]
    rollouts_state: list[dict] = [{} for _ in range(cfg.banks)]
    with ActorSystem() as system:
        def finish() -> None:
            with lock:
                remaining[0] -= 1
                if remaining[0] == 0:
                    done.set()

        refs = []
        for b in range(cfg.banks):
            env_seed, replay_seed = bank_seeds(cfg.seed, b)
            lst, rst = learners_state[b], rollouts_state[b]
            rst["worker"] = RolloutWorker.create(make_env(cfg.env), env_seed, cfg.epsilon)
            lst["model"] = make_model(make_env(cfg.env), cfg.alpha, cfg.gamma, cfg.sync_every)
            lst["hashes"] = []
            buf = ReplayBuffer(cfg.capacity, prioritized=cfg.prioritized)
            rng = np.random.default_rng(replay_seed)
            peers: dict[str, object] = {}

            def rollout(params, ctx, rst=rst, peers=peers):
                peers["replay"].send(rst["worker"].collect(params, cfg.steps_per_rollout))

            def replay(batch, ctx, buf=buf, rng=rng, peers=peers):
                buf.append(batch)
                peers["learner"].send(buf.sample(cfg.batch_size, rng))

            def learner(batch, ctx, lst=lst, peers=peers):
                model = lst["model"]
                update_model(model, batch)
                lst["hashes"].append(model.param_hash())
                if model.updates < cfg.iterations:
                    peers["rollout"].send(model.snapshot())
                else:
                    finish()

            peers["rollout"] = system.spawn(rollout, name=f"rollout-{b}")
            peers["replay"] = system.spawn(replay, name=f"replay-{b}")
            peers["learner"] = system.spawn(learner, name=f"learner-{b}")
            refs.append((peers, lst))
        t0 = time.perf_counter_ns()
        for peers, lst in refs:
            peers["rollout"].send(lst["model"].snapshot())
        if not done.wait(timeout):
            dead = [r.name for r in system.actors if r.dead]
            raise TimeoutError(f"actor pipeline did not finish; dead actors: {dead}")
        wall = time.perf_counter_ns() - t0
    return ActorPipelineResult(
        wall_ns=wall,
        param_hashes=[s["hashes"] for s in learners_state],
        models=[s["model"] for s in learners_state],
        env_steps=sum(s["worker"].policy.steps for s in rollouts_state),
    )


def bench_parallel_q(batches: list[int], cfg: RLConfig | None = None, *, reps: int = 3,
                     warmup: int = 1, workers: int = 8, runtimes=("reactor", "actor"),
                     check_equivalence: bool = True) -> list[BenchResult]:
    """Training wall time per (runtime, batch size) for ``cfg.iterations`` iterations."""
    if reps < 3:
        raise ValueError("at least 3 repetitions")
    if not batches:
        raise ValueError("empty sweep")
    base = cfg or RLConfig(iterations=200)
    results = []
    for batch in batches:
        c = base.replace(batch_size=batch)
        compiled = compile_program(appendix_program(c))
        walls: dict[str, list[int]] = {r: [] for r in runtimes}
        hashes: dict[str, list[list[str]]] = {}
        for rep in range(reps + warmup):
            for runtime in runtimes:
                with paused_gc():
                    if runtime == "reactor":
                        res = run_pipeline(c, workers=workers, compiled=compiled)
                    else:
                        res = run_actor_pipeline(c)
                if rep >= warmup:
                    walls[runtime].append(res.wall_ns)
                hashes[runtime] = res.param_hashes
        if check_equivalence and len(hashes) == 2 and hashes["reactor"] != hashes["actor"]:
            raise RuntimeError(f"batch {batch}: runtimes learned different parameters")
        for runtime in runtimes:
            results.append(BenchResult(
                FAMILY, runtime, "batch", batch, walls[runtime], "train_ms",
                [w / 1e6 for w in walls[runtime]], c.seed, workers if runtime == "reactor" else 3 * c.banks,
                warmup, notes={"iterations": c.iterations, "banks": c.banks}))
    return results


def learning_check(cfg: RLConfig, workers: int = 8) -> tuple[float, float, list[tuple[int, float, float]]]:
    """(greedy mean return, random mean return, learning curve) of one reactor run."""
    res = run_pipeline(cfg.replace(eval_episodes=max(cfg.eval_episodes, 1)), workers=workers)
    greedy, rand = evaluate(cfg.replace(eval_episodes=max(cfg.eval_episodes, 1)), res.params)
    return greedy, rand, res.curve
