"""
Behavioral policies: uniform random actions and noisy scripted PD controllers.

Actions are drawn from a Gaussian centred on the controller output and
clamped to [-1, 1]. `random_prob` replaces the controller with a uniform
action on a per-step coin flip, which is how the mixed distribution anneals
from random-level to medium-level behaviour.
"""
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from core.env import Gains, ProprioState, Task


@dataclass(frozen=True)
class BehavioralPolicy:
    kind: str
    gains: Gains = field(default_factory=lambda: Gains(0.0, 0.0))
    noise_std: float = 0.0
    random_prob: float = 0.0

    def __post_init__(self):
        if self.kind not in ("random", "pd"):
            raise ValueError(f"Unknown policy kind '{self.kind}'")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if not 0.0 <= self.random_prob <= 1.0:
            raise ValueError(f"random_prob must be in [0, 1], got {self.random_prob}")

    @classmethod
    def random(cls) -> "BehavioralPolicy":
        return cls(kind="random")

    @classmethod
    def pd(cls, gains: Gains, noise_std: float) -> "BehavioralPolicy":
        return cls(kind="pd", gains=gains, noise_std=noise_std)

    def act(self, task: Task, state: ProprioState, scale: float, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "random":
            return rng.uniform(-1.0, 1.0, size=task.action_dim)
        coin = rng.random()
        uniform = rng.uniform(-1.0, 1.0, size=task.action_dim)
        noise = rng.standard_normal(task.action_dim) * self.noise_std
        if coin < self.random_prob:
            return uniform
        return np.clip(task.controller(state, self.gains, scale) + noise, -1.0, 1.0)

    def for_episode(self, index: int, count: int) -> "BehavioralPolicy":
        return self

    def describe(self) -> Dict[str, Any]:
        if self.kind == "random":
            return {"kind": "random"}
        return {"kind": "pd", "kp": self.gains.kp, "kd": self.gains.kd,
                "noise_std": self.noise_std, "random_prob": self.random_prob}


@dataclass(frozen=True)
class AnnealedPolicy:
    """
    Uniform actions for the first `warmup` share of episodes, the target policy
    for the last `cooldown` share, and a linear blend of the two in between.
    """
    target: BehavioralPolicy
    warmup: float = 0.2
    cooldown: float = 0.2

    def for_episode(self, index: int, count: int) -> BehavioralPolicy:
        progress = index / max(count - 1, 1)
        span = max(1.0 - self.warmup - self.cooldown, 1e-9)
        weight = float(np.clip((progress - self.warmup) / span, 0.0, 1.0))
        return BehavioralPolicy(kind="pd", gains=self.target.gains, noise_std=self.target.noise_std,
                                random_prob=1.0 - weight)

    def describe(self) -> Dict[str, Any]:
        return {"kind": "annealed", "target": self.target.describe(),
                "warmup": self.warmup, "cooldown": self.cooldown}
