"""
Shared networks of the model-free agents: conv encoder, deterministic
tanh actor and twin Q critics, each with a LayerNorm/tanh trunk.
"""
from typing import Tuple

import numpy as np

from core.nn import Conv2d, Dense, LayerNorm, Module, Tensor, as_tensor, concat, conv_output_size


class Encoder(Module):
    """Frame stack (B, H, W, 3k) in [0, 1] -> flat features."""

    def __init__(self, obs_shape: Tuple[int, int, int], channels: int, rng: np.random.Generator):
        super().__init__()
        size, _, depth = obs_shape
        self.conv1 = self.add_module("conv1", Conv2d(depth, channels, 3, stride=2, activation="relu", rng=rng))
        self.conv2 = self.add_module("conv2", Conv2d(channels, channels, 3, stride=1, activation="relu", rng=rng))
        out = conv_output_size(conv_output_size(size, 3, 2, 0), 3, 1, 0)
        self.repr_dim = out * out * channels

    def forward(self, obs) -> Tensor:
        x = self.conv2(self.conv1(as_tensor(obs) - 0.5))
        return x.reshape(x.shape[0], -1)


class Trunk(Module):
    def __init__(self, repr_dim: int, feature_dim: int, rng: np.random.Generator):
        super().__init__()
        self.dense = self.add_module("dense", Dense(repr_dim, feature_dim, rng=rng))
        self.norm = self.add_module("norm", LayerNorm(feature_dim))

    def forward(self, h: Tensor) -> Tensor:
        return self.norm(self.dense(h)).tanh()


class MLP(Module):
    """Two hidden relu layers and a linear output."""

    def __init__(self, in_features: int, hidden: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.l1 = self.add_module("l1", Dense(in_features, hidden, "relu", rng=rng))
        self.l2 = self.add_module("l2", Dense(hidden, hidden, "relu", rng=rng))
        self.out = self.add_module("out", Dense(hidden, out_features, rng=rng))

    def forward(self, x: Tensor) -> Tensor:
        return self.out(self.l2(self.l1(x)))


class Actor(Module):
    def __init__(self, repr_dim: int, action_dim: int, feature_dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.trunk = self.add_module("trunk", Trunk(repr_dim, feature_dim, rng))
        self.policy = self.add_module("policy", MLP(feature_dim, hidden, action_dim, rng))

    def forward(self, h: Tensor) -> Tensor:
        """Deterministic action tanh(mu) in [-1, 1]^d."""
        return self.policy(self.trunk(h)).tanh()


class Critic(Module):
    def __init__(self, repr_dim: int, action_dim: int, feature_dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.trunk = self.add_module("trunk", Trunk(repr_dim, feature_dim, rng))
        self.q1 = self.add_module("q1", MLP(feature_dim + action_dim, hidden, 1, rng))
        self.q2 = self.add_module("q2", MLP(feature_dim + action_dim, hidden, 1, rng))

    def forward(self, h: Tensor, action) -> Tuple[Tensor, Tensor]:
        x = concat([self.trunk(h), as_tensor(action)], axis=-1)
        q1, q2 = self.q1(x), self.q2(x)
        return q1.reshape(q1.shape[0]), q2.reshape(q2.shape[0])
