"""Pipeline configuration loaded from YAML or JSON."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .rollout import EpsilonSchedule


@dataclass
class RLConfig:
    env: str = "blackjack"
    banks: int = 6
    width: int = 6
    steps_per_rollout: int = 32
    batch_size: int = 32
    alpha: float = 0.1
    gamma: float = 1.0
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 20_000
    capacity: int = 10_000
    sync_every: int = 1
    seed: int = 0
    iterations: int = 1000
    averaging: bool = False
    prioritized: bool = False
    curve_every: int = 50
    eval_episodes: int = 0

    def __post_init__(self) -> None:
        for name in ("banks", "width", "steps_per_rollout", "batch_size", "capacity",
                     "sync_every", "iterations", "curve_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.averaging and self.width != self.banks:
            raise ValueError("parameter averaging needs width == banks")

    @property
    def epsilon(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps_start, self.eps_end, self.eps_decay_steps)

    def replace(self, **changes: Any) -> RLConfig:
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> RLConfig:
        data = dict(data or {})
        eps = data.pop("epsilon", None)
        if isinstance(eps, Mapping):
            for src, dst in (("start", "eps_start"), ("end", "eps_end"), ("decay_steps", "eps_decay_steps")):
                if src in eps:
                    data[dst] = eps[src]
        elif eps is not None:
            data["eps_start"] = data["eps_end"] = float(eps)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> RLConfig:
        """Read a YAML (or JSON, which YAML parses too) file."""
        with open(path) as fh:
            return cls.from_mapping(yaml.safe_load(fh) or {})
