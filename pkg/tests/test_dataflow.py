from __future__ import annotations

import json

import numpy as np
import pytest

from reactorrl.rl.config import RLConfig
from reactorrl.rl.dataflow import appendix_program, learning_curve, run_pipeline
from reactorrl.rl.envs import GridWorld
from reactorrl.graph import compile_program

SMALL = RLConfig(iterations=80, steps_per_rollout=16, batch_size=16, seed=4)


def greedy_path_length(table: np.ndarray, size: int = 5) -> int | None:
    env = GridWorld(size)
    obs = env.reset(0)
    for k in range(1, env.max_steps + 1):
        obs, reward, done = env.step(int(table[obs].argmax()))
        if done:
            return k if reward > 0 else None
    return None


def test_param_hashes_identical_across_runs_and_workers():
    runs = [run_pipeline(SMALL, workers=w) for w in (1, 1, 2, 4)]
    first = runs[0].param_hashes
    assert len(first) == 6 and all(len(h) == SMALL.iterations for h in first)
    for r in runs[1:]:
        assert r.param_hashes == first
        assert r.report.reactions_executed == runs[0].report.reactions_executed


def test_one_tag_per_iteration():
    res = run_pipeline(SMALL)
    # startup, one microstep per iteration, then the shutdown tag
    assert res.report.tags_processed == SMALL.iterations + 2
    assert res.report.executed_tags[-1] == (0, SMALL.iterations + 1)
    assert res.env_steps == SMALL.banks * SMALL.iterations * SMALL.steps_per_rollout


def test_trace_identical_across_workers():
    a = run_pipeline(SMALL.replace(iterations=20), workers=1, trace=True).report.trace_csv()
    b = run_pipeline(SMALL.replace(iterations=20), workers=3, trace=True).report.trace_csv()
    assert a == b


def test_averaging_mode():
    cfg = SMALL.replace(averaging=True, banks=3, width=3, iterations=30)
    one = run_pipeline(cfg)
    three = run_pipeline(cfg, workers=3)
    assert one.param_hashes == three.param_hashes
    # interleaved wiring: every rollout acts on the same averaged parameters, learners still differ
    assert len({h[-1] for h in one.param_hashes}) == 3
    with pytest.raises(ValueError):
        RLConfig(averaging=True, banks=3, width=2)


@pytest.mark.parametrize("env", ["gridworld", "image80"])
def test_other_environments_run(env):
    cfg = RLConfig(env=env, banks=2, width=2, iterations=5, steps_per_rollout=8, batch_size=8)
    res = run_pipeline(cfg, workers=2)
    assert all(len(h) == 5 for h in res.param_hashes)


def test_gridworld_convergence():
    """alpha 0.1, gamma 0.9, epsilon 1 -> 0.05: the greedy path is at most twice the shortest after 20k transitions."""
    good = 0
    for seed in range(10):
        cfg = RLConfig(env="gridworld", banks=1, width=1, steps_per_rollout=32, batch_size=32,
                       alpha=0.1, gamma=0.9, eps_start=1.0, eps_end=0.05, eps_decay_steps=20_000,
                       iterations=20_000 // 32, seed=seed)
        res = run_pipeline(cfg)
        assert res.env_steps == 20_000
        steps = greedy_path_length(res.params[0].table)
        good += steps is not None and steps <= 2 * GridWorld(5).shortest_path
    assert good >= 9


def test_learning_curve_rows():
    returns = [[[1.0], [], [0.0, 2.0], [3.0]]]
    rows = learning_curve(returns, [1_000_000, 2_000_000, 3_000_000, 4_000_000], 2)
    assert rows == [(2, 1.0, 2.0), (4, 5.0 / 3, 4.0)]


def test_pipeline_evaluation():
    res = run_pipeline(SMALL.replace(eval_episodes=200))
    assert res.eval_return is not None and res.random_return is not None


def test_config_from_yaml(tmp_path):
    path = tmp_path / "rl.yaml"
    path.write_text("env: gridworld\nbanks: 2\nwidth: 2\nepsilon:\n  start: 0.5\n  end: 0.1\n  decay_steps: 100\n")
    cfg = RLConfig.load(path)
    assert (cfg.env, cfg.banks, cfg.eps_start, cfg.eps_end, cfg.eps_decay_steps) == ("gridworld", 2, 0.5, 0.1, 100)
    jpath = tmp_path / "rl.json"
    jpath.write_text(json.dumps({"batch_size": 64, "epsilon": 0.2}))
    cfg = RLConfig.load(jpath)
    assert cfg.batch_size == 64 and cfg.eps_start == cfg.eps_end == 0.2
    assert RLConfig.load(_empty(tmp_path)) == RLConfig()


def _empty(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    return p


def test_config_validation():
    with pytest.raises(ValueError, match="unknown config keys"):
        RLConfig.from_mapping({"bnks": 3})
    with pytest.raises(ValueError):
        RLConfig(alpha=0)
    with pytest.raises(ValueError):
        RLConfig(batch_size=0)


def test_appendix_levels():
    g, lm = compile_program(appendix_program())
    level = {r.id: lm[r.index] for r in g.reactions}
    assert level["rollout[0].r0"] == 0
    assert level["learner[0].r1"] < level["rollout[0].r1"] < level["replay[0].r1"] < level["learner[0].r2"]
