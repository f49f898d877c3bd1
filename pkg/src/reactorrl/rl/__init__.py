"""Reinforcement-learning workloads expressed as reactor programs."""

from .config import RLConfig
from .dataflow import PipelineResult, appendix_program, evaluate, run_pipeline
from .envs import Blackjack, GridWorld, Image80, TrafficJunction, env_names, make_env
from .marl import default_policies, marl_inference_step, run_episodes
from .qtable import LinearQ, QTable, learner_update
from .replay import ReplayBuffer, Transition
from .rollout import EpsilonSchedule, RolloutWorker

__all__ = [
    "Blackjack", "EpsilonSchedule", "GridWorld", "Image80", "LinearQ", "PipelineResult", "QTable",
    "RLConfig", "ReplayBuffer", "RolloutWorker", "TrafficJunction", "Transition", "appendix_program",
    "default_policies", "env_names", "evaluate", "learner_update", "make_env", "marl_inference_step",
    "run_episodes", "run_pipeline",
]
