"""
Common plumbing of the frame-stack agents (DrQ+BC, CQL, BC): encoder and
actor construction, minibatch sampling, augmentation, acting.
"""
from typing import Any, Dict, List

import numpy as np

from core.data import Dataset, TransitionBatch, sample_batch
from core.eval.clock import steps_per_epoch
from core.nn import Adam, Module, no_grad

from .augment import random_shift
from .base import OfflineAgent, Phase
from .networks import Actor, Encoder


class FrameStackAgent(OfflineAgent):
    """Encoder + deterministic actor over frame stacks."""

    n_step: int = 1

    def __init__(self, cfg, env_config, seed: int = 0):
        super().__init__(cfg, env_config, seed)
        init = np.random.default_rng(seed)
        self.encoder = Encoder(env_config.observation_shape, cfg.conv_channels, init)
        self.actor = Actor(self.encoder.repr_dim, env_config.action_dim, cfg.feature_dim, cfg.mf_hidden, init)
        self.actor_opt = Adam(self.actor.named_parameters(), cfg.mf_lr)

    def plan(self, dataset: Dataset) -> List[Phase]:
        per_epoch = steps_per_epoch(dataset.transitions, self.cfg.mf_batch)
        return [Phase("agent", self.cfg.mf_agent_epochs * per_epoch)]

    def sample(self, dataset: Dataset) -> TransitionBatch:
        batch = min(self.cfg.mf_batch, dataset.transitions - len(dataset.episodes) * (self.n_step - 1))
        return sample_batch(dataset, batch, self.n_step, self.cfg.discount, rng=self.rng)

    def augment(self, obs: np.ndarray) -> np.ndarray:
        if not self.cfg.augment:
            return obs
        return random_shift(obs, self.cfg.augment_pad, self.rng)

    def act(self, obs: np.ndarray) -> np.ndarray:
        obs = self.check_observation(obs)
        with no_grad():
            action = self.actor(self.encoder(obs[None])).data[0]
        return np.clip(action, -1.0, 1.0)

    def modules(self) -> Dict[str, Module]:
        return {"encoder": self.encoder, "actor": self.actor}

    def spec(self) -> Dict[str, Any]:
        return {
            **super().spec(),
            "conv_channels": self.cfg.conv_channels,
            "feature_dim": self.cfg.feature_dim,
            "mf_hidden": self.cfg.mf_hidden,
        }
