"""Decentralized multi-agent inference on the traffic junction.

Each agent is one member of a reactor bank and sees only its own observation
channel. A junction reactor broadcasts observations, the agents answer with
actions at the next level of the same tag, and the junction steps the
environment and schedules the next step one microstep later.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..graph import compile_program
from ..program import ReactorClass
from ..scheduler import Runtime, RuntimeConfig
from .envs import TrafficJunction


def default_policies(n_agents: int, seed: int) -> list[np.ndarray]:
    """Greedy Q tables that drive on unless the cell ahead or the crossing is busy.

    Small per-agent noise keeps the tables distinct; the structure keeps
    episodes of sensible length.
    """
    rng = np.random.default_rng(seed)
    env = TrafficJunction(n_agents)
    base = np.zeros((env.n_states, env.n_actions))
    for obs in range(env.n_states):
        cross = obs & 1
        ahead = (obs >> 1) & 1
        base[obs, 1] = 0.5 - ahead - 0.6 * cross  # gas
        base[obs, 0] = 0.0  # brake
    tables = []
    for _ in range(n_agents):
        t = base + rng.normal(0.0, 0.3, base.shape)
        t.flags.writeable = False
        tables.append(t)
    return tables


def greedy_lookup(table: np.ndarray) -> tuple[int, ...]:
    """Greedy action per observation of a frozen Q table (ties go to the lowest action)."""
    return tuple(int(a) for a in np.asarray(table).argmax(axis=1))


def agent_class(policies: Sequence[np.ndarray]) -> ReactorClass:
    lookups = [greedy_lookup(t) for t in policies]
    agent = ReactorClass("Agent", {"bank_index": 0})
    agent.input("obs")
    agent.output("action")

    @agent.reaction(["obs"], effects=["action"], name="act")
    def act(ctx):
        ctx.set("action", lookups[ctx.bank_index][ctx.get("obs")])

    return agent


def inference_program(policies: Sequence[np.ndarray], observations: Sequence[int]) -> ReactorClass:
    """One tag: a source emits the observations, agents act, a sink records the joint action."""
    n = len(policies)
    src = ReactorClass("Observations")
    src.output("obs", n)

    @src.reaction(["startup"], effects=["obs"], name="emit")
    def emit(ctx):
        ctx.set_each("obs", observations)

    sink = ReactorClass("JointAction")
    sink.input("actions", n)
    sink.state("joint", None)

    @sink.reaction(["actions"], name="record")
    def record(ctx):
        ctx.state.joint = ctx.get_all("actions")

    main = ReactorClass("Main")
    main.new("source", src)
    main.new("agents", agent_class(policies), bank=n)
    main.new("sink", sink)
    main.connect("source.obs", "agents.obs")
    main.connect("agents.action", "sink.actions")
    return main


def marl_inference_step(policies: Sequence[np.ndarray], observations: Sequence[int],
                        workers: int = 1) -> list[int]:
    """Joint action from decentralized greedy policies, computed by an agent bank in one tag."""
    if len(policies) != len(observations):
        raise ValueError(f"{len(policies)} policies for {len(observations)} observations")
    if not policies:
        raise ValueError("no agents")
    g, lm = compile_program(inference_program(policies, observations))
    rt = Runtime(g, lm, RuntimeConfig(workers=workers, fast=True))
    rt.run()
    return list(rt.state_of("sink").joint)


@dataclass
class EpisodeStats:
    episodes: int = 0
    steps: int = 0
    returns: list[float] = field(default_factory=list)
    actions_hash: int = 0


def episodes_program(policies: Sequence[np.ndarray], episodes: int, seed: int) -> ReactorClass:
    n = len(policies)
    junction = ReactorClass("Junction")
    junction.output("obs", n)
    junction.input("actions", n)
    junction.action("next")
    junction.state("env", factory=lambda p: TrafficJunction(n))
    junction.state("stats", factory=lambda p: EpisodeStats())
    junction.state("obs_now", None)
    junction.state("ret", 0.0)

    @junction.reaction(["startup", "next"], effects=["obs"], name="observe")
    def observe(ctx):
        st = ctx.state
        if st.obs_now is None:
            st.obs_now = st.env.reset(seed + st.stats.episodes)
            st.ret = 0.0
        ctx.set_each("obs", st.obs_now)

    @junction.reaction(["actions"], effects=["next"], name="step")
    def step(ctx):
        st = ctx.state
        joint = ctx.get_all("actions")
        obs, rewards, done = st.env.step(joint)
        s = st.stats
        s.steps += 1
        s.actions_hash = hash((s.actions_hash, tuple(joint)))
        st.ret += sum(rewards)
        if done:
            s.episodes += 1
            s.returns.append(st.ret)
            st.obs_now = None
            if s.episodes >= episodes:
                return
        else:
            st.obs_now = obs
        ctx.schedule("next")

    main = ReactorClass("Main")
    main.new("junction", junction)
    main.new("agents", agent_class(policies), bank=n)
    main.connect("junction.obs", "agents.obs")
    main.connect("agents.action", "junction.actions")
    return main


def run_episodes(policies: Sequence[np.ndarray], episodes: int, seed: int,
                 workers: int = 1) -> tuple[EpisodeStats, int]:
    """(stats, wall ns) of ``episodes`` decentralized episodes on the reactor runtime."""
    g, lm = compile_program(episodes_program(policies, episodes, seed))
    rt = Runtime(g, lm, RuntimeConfig(workers=workers, fast=True, seed=seed))
    rep = rt.run()
    return rt.state_of("junction").stats, rep.wall_ns
