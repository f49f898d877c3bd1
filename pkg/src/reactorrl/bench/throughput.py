"""Environment sampling throughput with W parallel rollout workers.

Each iteration every worker advances its environment ``steps_per_call``
steps under a uniform-random policy and hands back the transitions. The
reactor collector receives the lists by reference; the actor driver receives
pickled copies. Both sides use the same environment seeds, so the total step
count (checked) and the sampled trajectories are identical.
"""

from __future__ import annotations

import math
import time

from ..actors import ActorSystem
from ..graph import compile_program
from ..program import ReactorClass
from ..rl.envs import make_env
from ..rl.rollout import EpsilonSchedule, RolloutWorker
from ..scheduler import Runtime, RuntimeConfig
from .report import BenchResult
from .stats import paused_gc

FAMILY = "env-throughput"
RANDOM = EpsilonSchedule.constant(1.0)


def worker_seed(seed: int, i: int) -> int:
    return seed * 1000 + i


def throughput_program(env: str, workers: int, steps_per_call: int, iterations: int,
                       seed: int) -> ReactorClass:
    rollout = ReactorClass("Rollout", {"bank_index": 0})
    rollout.input("go")
    rollout.output("batch")
    rollout.state("worker")

    @rollout.reaction(["startup"], name="init_env")
    def init_env(ctx):
        ctx.state.worker = RolloutWorker.create(make_env(env), worker_seed(seed, ctx.bank_index), RANDOM)

    @rollout.reaction(["go"], effects=["batch"], name="collect")
    def collect(ctx):
        ctx.set("batch", ctx.state.worker.collect(None, steps_per_call))

    coll = ReactorClass("Collector")
    coll.output("go", workers)
    coll.input("batches", workers)
    coll.action("next")
    coll.state("iteration", 0)
    coll.state("observations", 0)
    coll.state("t0", 0)
    coll.state("t1", 0)

    @coll.reaction(["startup", "next"], effects=["go"], name="dispatch")
    def dispatch(ctx):
        if ctx.state.iteration == 0:
            ctx.state.t0 = time.perf_counter_ns()
        ctx.set_all("go", ctx.state.iteration)

    @coll.reaction(["batches"], effects=["next"], name="receive")
    def receive(ctx):
        ctx.state.observations += sum(len(b) for b in ctx.get_all("batches"))
        ctx.state.iteration += 1
        if ctx.state.iteration < iterations:
            ctx.schedule("next")
        else:
            ctx.state.t1 = time.perf_counter_ns()

    main = ReactorClass("Main")
    main.new("collector", coll)
    main.new("rollout", rollout, bank=workers)
    main.connect("collector.go", "rollout.go")
    main.connect("rollout.batch", "collector.batches")
    return main


def reactor_run(env: str, workers: int, steps_per_call: int, iterations: int, seed: int) -> tuple[int, int]:
    """(wall ns, observations)"""
    g, lm = compile_program(throughput_program(env, workers, steps_per_call, iterations, seed))
    rt = Runtime(g, lm, RuntimeConfig(workers=workers, fast=True, seed=seed))
    rt.run()
    st = rt.state_of("collector")
    return st.t1 - st.t0, st.observations


def actor_run(env: str, workers: int, steps_per_call: int, iterations: int, seed: int) -> tuple[int, int]:
    with ActorSystem() as system:
        def make_behavior(i: int):
            state = {}

            def behavior(msg, ctx):
                if msg == "init":
                    state["w"] = RolloutWorker.create(make_env(env), worker_seed(seed, i), RANDOM)
                    return None
                return state["w"].collect(None, steps_per_call)
            return behavior

        refs = [system.spawn(make_behavior(i), name=f"rollout-{i}") for i in range(workers)]
        inbox = system.inbox()
        system.broadcast_gather(refs, "init", inbox=inbox)
        observations = 0
        t0 = time.perf_counter_ns()
        for it in range(iterations):
            for batch in system.broadcast_gather(refs, it, inbox=inbox, timeout=600):
                observations += len(batch)
        return time.perf_counter_ns() - t0, observations


def bench_env_throughput(envs: list[str], *, workers: int = 8, steps: int = 100_000,
                         steps_per_call: int = 100, reps: int = 5, warmup: int = 1, seed: int = 42,
                         runtimes=("reactor", "actor")) -> list[BenchResult]:
    """obs/sec per (runtime, env); ``steps`` is the per-repetition step budget."""
    if reps < 3:
        raise ValueError("at least 3 repetitions")
    if not envs:
        raise ValueError("empty sweep")
    iterations = max(1, math.ceil(steps / (workers * steps_per_call)))
    runners = {"reactor": reactor_run, "actor": actor_run}
    samples: dict[tuple[str, str], list[tuple[int, int]]] = {(e, r): [] for e in envs for r in runtimes}
    for rep in range(reps + warmup):
        for env in envs:
            for runtime in runtimes:
                with paused_gc():
                    wall, obs = runners[runtime](env, workers, steps_per_call, iterations, seed + rep)
                if rep >= warmup:
                    samples[(env, runtime)].append((wall, obs))
    expected = iterations * workers * steps_per_call
    results = []
    for env in envs:
        for runtime in runtimes:
            runs = samples[(env, runtime)]
            if any(obs != expected for _, obs in runs):
                raise RuntimeError(f"{runtime} on {env}: step count differs from {expected}")
            results.append(BenchResult(
                FAMILY, runtime, "env", env, [w for w, _ in runs], "obs_per_sec",
                [obs / (w / 1e9) for w, obs in runs], seed, workers, warmup,
                notes={"steps": expected}))
    return results
