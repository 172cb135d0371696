"""
CQL(H) on the DrQ-v2 backbone.

    Q loss = alpha_cql * [logsumexp_j Q(s, a_j) - Q(s, a_data)] + 1/2 * TD^2

The a_j are uniform actions plus noisy current-policy actions. The actor is
the plain DrQ-v2 actor: maximize min(Q1, Q2) with no BC term.
"""
from typing import Dict, Tuple

import numpy as np

from config import resolve_cql_alpha
from core.data import TransitionBatch
from core.nn import Tensor

from .drqbc import CriticAgent, min_q


def cql_regularizer(q_samples: Tensor, q_data: Tensor) -> Tensor:
    """Batch mean of logsumexp over sampled actions minus Q of the data action; q_samples is (B, N)."""
    return (q_samples.logsumexp(axis=1) - q_data).mean()


def cql_loss(q_data: Tensor, target: np.ndarray, q_samples: Tensor, alpha: float) -> Tensor:
    td = ((q_data - target) ** 2).mean() * 0.5
    if alpha == 0.0:
        return td
    return cql_regularizer(q_samples, q_data) * alpha + td


class CQLAgent(CriticAgent):
    name = "cql"

    def __init__(self, cfg, env_config, seed: int = 0):
        super().__init__(cfg, env_config, seed)
        if cfg.cql_uniform_samples + cfg.cql_policy_samples < 2:
            raise ValueError("CQL needs at least two sampled actions per state")
        self.alpha = resolve_cql_alpha(env_config.task, cfg.distribution, cfg.cql_alpha)

    def sampled_actions(self, h: Tensor) -> np.ndarray:
        """(B, N, d): uniform draws then current-policy draws with scheduled noise."""
        b, d = h.shape[0], self.env_config.action_dim
        uniform = self.rng.uniform(-1.0, 1.0, size=(b, self.cfg.cql_uniform_samples, d))
        mu = self.actor(h.detach()).data[:, None, :]
        noise = self.rng.standard_normal((b, self.cfg.cql_policy_samples, d)) * self.stddev(self.updates)
        policy = np.clip(mu + noise, -1.0, 1.0)
        return np.concatenate([uniform, policy], axis=1)

    def critic_loss(self, h: Tensor, batch: TransitionBatch, target: np.ndarray) -> Tuple[Tensor, Dict[str, float]]:
        q1, q2 = self.critic(h, batch.action)
        samples = self.sampled_actions(h)
        b, n, d = samples.shape
        rows = np.repeat(np.arange(b), n)
        s1, s2 = self.critic(h[rows], samples.reshape(b * n, d))
        s1, s2 = s1.reshape(b, n), s2.reshape(b, n)
        loss = cql_loss(q1, target, s1, self.alpha) + cql_loss(q2, target, s2, self.alpha)
        return loss, {"critic_loss": float(loss.data), "q1": float(q1.data.mean()),
                      "cql_gap": float(cql_regularizer(s1, q1).data)}

    def actor_loss(self, h: Tensor, batch: TransitionBatch) -> Tuple[Tensor, Dict[str, float]]:
        loss = -min_q(self.critic, h, self.actor(h)).mean()
        return loss, {"actor_loss": float(loss.data)}
