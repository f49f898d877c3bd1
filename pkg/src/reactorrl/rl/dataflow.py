"""Rollout, replay and learner reactors wired as banks of independent pipelines.

Each iteration is one tag. The learner emits a parameter snapshot through a
zero-delay logical action, so its emission lands one microstep after the
update that produced it; the rollout and replay reactions of the next
iteration then run at that later microstep. Wiring the learner's output
directly, with no action in between, closes a zero-delay cycle
(learner, rollout, replay, learner) that :func:`validate_causality` rejects.

With ``averaging=False`` learner ``j`` feeds rollout ``j`` on every channel,
giving ``banks`` independent pipelines. With ``averaging=True`` the gradients
are connected interleaved, so rollout ``j`` receives channel ``j`` of every
learner and acts on their mean.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..graph import LevelMap, ProgramGraph, compile_program
from ..program import ReactorClass
from ..scheduler import ExecutionReport, Runtime, RuntimeConfig
from .config import RLConfig
from .envs import make_env
from .qtable import average_params, make_model, update_model
from .replay import ReplayBuffer
from .rollout import RolloutWorker, evaluate_policy


def bank_seeds(master_seed: int, bank_index: int) -> tuple[int, int]:
    """(rollout seed, replay seed) for one bank; depends only on ``master_seed + bank_index``."""
    ss = np.random.SeedSequence(master_seed + bank_index)
    env_seed, replay_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    return env_seed, replay_seed


def split_even(items: Sequence[Any], parts: int) -> list[list[Any]]:
    """Contiguous, order-preserving split into ``parts`` near-equal chunks."""
    n = len(items)
    return [list(items[k * n // parts:(k + 1) * n // parts]) for k in range(parts)]


def concat_present(values: Sequence[Any]) -> list[Any]:
    out: list[Any] = []
    for v in values:
        if v is not None:
            out.extend(v)
    return out


def rollout_class(cfg: RLConfig) -> ReactorClass:
    rc = ReactorClass("RolloutReactor", {"bank_index": 0})
    rc.input("gradients", cfg.width)
    rc.output("trajectories", cfg.width)
    rc.state("environment_state")
    rc.state("policy_state")
    rc.state("action_buffer")
    rc.state("reward_buffer")
    rc.state("observation_buffer")
    rc.state("returns", factory=lambda p: [])
    rc.state("stamps", factory=lambda p: [])

    @rc.reaction(["startup"], name="init_environment")
    def init_environment(ctx):
        env_seed, _ = bank_seeds(cfg.seed, ctx.bank_index or 0)
        worker = RolloutWorker.create(make_env(cfg.env), env_seed, cfg.epsilon)
        st = ctx.state
        st.environment_state = worker
        st.policy_state = worker.policy
        st.action_buffer = worker.action_buffer
        st.reward_buffer = worker.reward_buffer
        st.observation_buffer = worker.observation_buffer

    @rc.reaction(["gradients"], effects=["trajectories"], name="rollout")
    def rollout(ctx):
        received = [p for p in ctx.get_all("gradients") if p is not None]
        if cfg.averaging:
            params = average_params(received)
        else:
            params = received[0]
        worker = ctx.state.environment_state
        batch = worker.collect(params, cfg.steps_per_rollout)
        for k, chunk in enumerate(split_even(batch, cfg.width)):
            ctx.set("trajectories", chunk, channel=k)
        ctx.state.returns.append(worker.drain_returns())
        ctx.state.stamps.append(ctx.physical_now())

    return rc


def replay_class(cfg: RLConfig) -> ReactorClass:
    rc = ReactorClass("ReplayBufferReactor", {"bank_index": 0})
    rc.input("trajectories", cfg.width)
    rc.output("dataset", cfg.width)
    rc.state("experience_data")
    rc.state("sampling_rng")

    @rc.reaction(["startup"], name="init_buffer")
    def init_buffer(ctx):
        _, replay_seed = bank_seeds(cfg.seed, ctx.bank_index or 0)
        ctx.state.experience_data = ReplayBuffer(cfg.capacity, prioritized=cfg.prioritized)
        ctx.state.sampling_rng = np.random.default_rng(replay_seed)

    @rc.reaction(["trajectories"], effects=["dataset"], name="store_and_sample")
    def store_and_sample(ctx):
        buf = ctx.state.experience_data
        buf.append(concat_present(ctx.get_all("trajectories")))
        batch = buf.sample(cfg.batch_size, ctx.state.sampling_rng)
        for k, chunk in enumerate(split_even(batch, cfg.width)):
            ctx.set("dataset", chunk, channel=k)

    return rc


def learner_class(cfg: RLConfig, zero_delay: bool = False) -> ReactorClass:
    """``zero_delay=True`` builds the literal, cyclic wiring that the compiler rejects."""
    rc = ReactorClass("LearnerReactor", {"bank_index": 0})
    rc.output("gradients", cfg.width)
    rc.input("dataset", cfg.width)
    rc.state("model_parameter")
    rc.state("param_hashes", factory=lambda p: [])

    def init_policy(ctx):
        env = make_env(cfg.env)
        ctx.state.model_parameter = make_model(env, cfg.alpha, cfg.gamma, cfg.sync_every)

    def train(ctx):
        model = ctx.state.model_parameter
        update_model(model, concat_present(ctx.get_all("dataset")))
        ctx.state.param_hashes.append(model.param_hash())
        return model.updates < cfg.iterations

    if zero_delay:
        @rc.reaction(["startup"], effects=["gradients"], name="init_policy")
        def init_direct(ctx):
            init_policy(ctx)
            ctx.set_all("gradients", ctx.state.model_parameter.snapshot())

        @rc.reaction(["dataset"], effects=["gradients"], name="update_policy")
        def update_direct(ctx):
            if train(ctx):
                ctx.set_all("gradients", ctx.state.model_parameter.snapshot())
        return rc

    rc.action("emit")

    # emission must precede the update in declaration order: the reverse order
    # adds an intra-reactor edge update -> emit that closes a cycle again
    @rc.reaction(["startup"], effects=["emit"], name="init_policy")
    def init_scheduled(ctx):
        init_policy(ctx)
        ctx.schedule("emit", ctx.state.model_parameter.snapshot())

    @rc.reaction(["emit"], effects=["gradients"], name="emit_gradients")
    def emit_gradients(ctx):
        ctx.set_all("gradients", ctx.get("emit"))

    @rc.reaction(["dataset"], effects=["emit"], name="update_policy")
    def update_scheduled(ctx):
        if train(ctx):
            ctx.schedule("emit", ctx.state.model_parameter.snapshot())

    return rc


def appendix_program(cfg: RLConfig | None = None, *, zero_delay: bool = False) -> ReactorClass:
    """Main reactor with ``cfg.banks`` rollout, replay and learner instances."""
    cfg = cfg or RLConfig()
    main = ReactorClass("Main")
    main.new("rollout", rollout_class(cfg), bank=cfg.banks)
    main.new("replay", replay_class(cfg), bank=cfg.banks)
    main.new("learner", learner_class(cfg, zero_delay=zero_delay), bank=cfg.banks)
    gradients = "interleaved(learner.gradients)" if cfg.averaging else "learner.gradients"
    main.connect(gradients, "rollout.gradients", broadcast=True)
    main.connect("rollout.trajectories", "replay.trajectories", broadcast=True)
    main.connect("replay.dataset", "learner.dataset", broadcast=True)
    return main


@dataclass
class PipelineResult:
    report: ExecutionReport
    param_hashes: list[list[str]]
    params: list[Any]
    curve: list[tuple[int, float, float]] = field(default_factory=list)
    env_steps: int = 0
    wall_ns: int = 0
    eval_return: float | None = None
    random_return: float | None = None


def learning_curve(returns: list[list[list[float]]], stamps: list[int], every: int,
                   origin_ns: int = 0) -> list[tuple[int, float, float]]:
    """(iteration, mean return of episodes finished in the window, wall ms) rows."""
    rows = []
    n_iter = len(stamps)
    for end in range(every, n_iter + 1, every):
        window = [r for bank in returns for it in bank[end - every:end] for r in it]
        mean = float(np.mean(window)) if window else float("nan")
        rows.append((end, mean, (stamps[end - 1] - origin_ns) / 1e6))
    return rows


def run_pipeline(cfg: RLConfig, *, workers: int = 1, trace: bool = False,
                 compiled: tuple[ProgramGraph, LevelMap] | None = None) -> PipelineResult:
    g, lm = compiled or compile_program(appendix_program(cfg))
    rt = Runtime(g, lm, RuntimeConfig(workers=workers, seed=cfg.seed, fast=True, trace=trace))
    t0 = time.perf_counter_ns()
    report = rt.run()
    wall = time.perf_counter_ns() - t0
    learners = [rt.state_of(f"learner[{b}]") for b in range(cfg.banks)]
    rollouts = [rt.state_of(f"rollout[{b}]") for b in range(cfg.banks)]
    res = PipelineResult(
        report=report,
        param_hashes=[list(s.param_hashes) for s in learners],
        params=[s.model_parameter for s in learners],
        curve=learning_curve([r.returns for r in rollouts], rollouts[0].stamps, cfg.curve_every),
        env_steps=sum(r.environment_state.policy.steps for r in rollouts),
        wall_ns=wall,
    )
    if cfg.eval_episodes:
        res.eval_return, res.random_return = evaluate(cfg, res.params)
    return res


def evaluate(cfg: RLConfig, models: Sequence[Any], seed: int = 10_007) -> tuple[float, float]:
    """(greedy mean return of the averaged learned parameters, uniform-random mean return)."""
    params = average_params([m.snapshot() for m in models])
    env = make_env(cfg.env)
    return (evaluate_policy(env, params, cfg.eval_episodes, seed),
            evaluate_policy(env, None, cfg.eval_episodes, seed))
