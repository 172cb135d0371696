"""
DrQ+BC: DrQ-v2 twin critics with shift augmentation and n-step targets,
plus a behavioral-cloning regularized actor.

    actor loss = -lambda * Q1(h, pi(h)) + ||pi(h) - a||^2,   lambda = alpha / mean|Q1|

The encoder learns from the critic loss only; the actor reads detached
features. Target critics track the live critics by EMA.
"""
import re
from abc import abstractmethod
from typing import Callable, Dict, List, Tuple

import numpy as np

from core.data import Dataset, TransitionBatch
from core.nn import Adam, Module, StepReport, Tensor, minimum, no_grad

from .model_free import FrameStackAgent
from .networks import Critic

_LINEAR = re.compile(r"^\s*linear\(\s*([^,]+),\s*([^,]+),\s*([^)]+)\)\s*$")


def parse_schedule(text: str) -> Callable[[int], float]:
    """'linear(init, final, duration)' or a constant."""
    match = _LINEAR.match(str(text))
    if match:
        init, final, duration = (float(v) for v in match.groups())

        def schedule(step: int) -> float:
            mix = np.clip(step / duration, 0.0, 1.0)
            return float((1.0 - mix) * init + mix * final)
        return schedule
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"Unrecognized schedule '{text}'")
    return lambda step: value


def bc_lambda(q: np.ndarray, alpha: float, max_lambda: float) -> float:
    """alpha / mean|Q| over the minibatch; max_lambda stands in when mean|Q| == 0."""
    scale = float(np.mean(np.abs(q)))
    if scale == 0.0:
        return max_lambda
    return alpha / scale


def bc_term(pi: Tensor, actions: np.ndarray) -> Tensor:
    """Batch mean of the squared action error norm."""
    return ((pi - actions) ** 2).sum(axis=-1).mean()


class CriticAgent(FrameStackAgent):
    """Twin critics, EMA targets and smoothed n-step targets."""

    def __init__(self, cfg, env_config, seed: int = 0):
        super().__init__(cfg, env_config, seed)
        self.n_step = cfg.n_step
        init = np.random.default_rng(seed + 1)
        dim = env_config.action_dim
        self.critic = Critic(self.encoder.repr_dim, dim, cfg.feature_dim, cfg.mf_hidden, init)
        self.critic_target = Critic(self.encoder.repr_dim, dim, cfg.feature_dim, cfg.mf_hidden, init)
        self.critic_target.copy_from(self.critic)
        critic_params = {**self.encoder.named_parameters("encoder."), **self.critic.named_parameters("critic.")}
        self.critic_opt = Adam(critic_params, cfg.mf_lr)
        self.stddev = parse_schedule(cfg.stddev_schedule)
        self.updates = 0

    def smoothed_target(self, batch: TransitionBatch, next_obs: np.ndarray) -> np.ndarray:
        """n-step reward + gamma^n * min(Q1', Q2')(s', clip(pi(s') + clipped noise))."""
        with no_grad():
            h_next = self.encoder(next_obs)
            mu = self.actor(h_next).data
            noise = np.clip(self.rng.standard_normal(mu.shape) * self.stddev(self.updates),
                            -self.cfg.stddev_clip, self.cfg.stddev_clip)
            action = np.clip(mu + noise, -1.0, 1.0)
            tq1, tq2 = self.critic_target(h_next, action)
            return batch.reward + batch.discount * np.minimum(tq1.data, tq2.data)

    def critic_loss(self, h: Tensor, batch: TransitionBatch, target: np.ndarray) -> Tuple[Tensor, Dict[str, float]]:
        q1, q2 = self.critic(h, batch.action)
        loss = ((q1 - target) ** 2).mean() + ((q2 - target) ** 2).mean()
        return loss, {"critic_loss": float(loss.data), "q1": float(q1.data.mean())}

    @abstractmethod
    def actor_loss(self, h: Tensor, batch: TransitionBatch) -> Tuple[Tensor, Dict[str, float]]:
        pass

    def train_step(self, phase: str, dataset: Dataset, step: int) -> Tuple[Dict[str, float], List[StepReport]]:
        batch = self.sample(dataset)
        obs = self.augment(batch.obs)
        next_obs = self.augment(batch.next_obs)
        target = self.smoothed_target(batch, next_obs)

        self.critic_opt.zero_grad()
        h = self.encoder(obs)
        loss, metrics = self.critic_loss(h, batch, target)
        loss.backward()
        critic_report = self.critic_opt.step()

        self.actor_opt.zero_grad()
        actor_loss, actor_metrics = self.actor_loss(h.detach(), batch)
        actor_loss.backward()
        actor_report = self.actor_opt.step()

        self.critic_target.soft_update_from(self.critic, self.cfg.critic_tau)
        self.updates += 1
        return {**metrics, **actor_metrics}, [critic_report, actor_report]

    def modules(self) -> Dict[str, Module]:
        return {**super().modules(), "critic": self.critic, "critic_target": self.critic_target}


class DrQBCAgent(CriticAgent):
    name = "drqbc"

    def actor_loss(self, h: Tensor, batch: TransitionBatch) -> Tuple[Tensor, Dict[str, float]]:
        pi = self.actor(h)
        q1, _ = self.critic(h, pi)
        lam = bc_lambda(q1.data, self.cfg.bc_alpha, self.cfg.bc_lambda_max)
        bc = bc_term(pi, batch.action)
        loss = -lam * q1.mean() + bc
        return loss, {"actor_loss": float(loss.data), "bc": float(bc.data), "lambda": lam}


def min_q(critic: Critic, h: Tensor, action) -> Tensor:
    q1, q2 = critic(h, action)
    return minimum(q1, q2)
