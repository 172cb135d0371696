"""
Offline DV2: RSSM ensemble world model, then a latent actor-critic trained
purely in imagination on uncertainty-penalized rewards.

Phase "model" fits the world model on dataset sequences. Phase "agent"
filters a sequence batch to posterior start states, imagines H steps with the
current actor and trains
    actor:  maximize TD(lambda) returns by backpropagating through the dynamics
    critic: regress the TD(lambda) returns, bootstrapped from a slow copy
The environment is never stepped.
"""
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config import resolve_penalty_weight
from core.data import Dataset, sample_sequences
from core.eval.clock import steps_per_epoch
from core.nn import Adam, Dense, Module, StepReport, Tensor, no_grad, stack
from core.world_model import Imagination, LatentState, RSSMConfig, RSSMEnsemble, imagine, penalized_reward
from core.world_model.training import model_step

from .base import OfflineAgent, Phase

MIN_STD = 0.1


class LatentActor(Module):
    """Tanh-squashed Gaussian policy over latent features."""

    def __init__(self, feature_size: int, hidden: int, action_dim: int, rng: np.random.Generator):
        super().__init__()
        self.action_dim = action_dim
        self.l1 = self.add_module("l1", Dense(feature_size, hidden, "elu", rng=rng))
        self.l2 = self.add_module("l2", Dense(hidden, hidden, "elu", rng=rng))
        self.out = self.add_module("out", Dense(hidden, 2 * action_dim, rng=rng))

    def distribution(self, feature: Tensor) -> Tuple[Tensor, Tensor]:
        x = self.out(self.l2(self.l1(feature)))
        d = self.action_dim
        return x[..., :d], x[..., d:].softplus() + MIN_STD

    def sample(self, feature: Tensor, rng: np.random.Generator) -> Tuple[Tensor, Tensor]:
        """Reparameterized sample and the Gaussian entropy per row."""
        mean, std = self.distribution(feature)
        eps = rng.standard_normal(mean.shape)
        entropy = (std.log() + 0.5 * math.log(2.0 * math.pi * math.e)).sum(axis=-1)
        return (mean + std * eps).tanh(), entropy

    def mode(self, feature: Tensor) -> Tensor:
        mean, _ = self.distribution(feature)
        return mean.tanh()


class LatentCritic(Module):
    def __init__(self, feature_size: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.l1 = self.add_module("l1", Dense(feature_size, hidden, "elu", rng=rng))
        self.l2 = self.add_module("l2", Dense(hidden, hidden, "elu", rng=rng))
        self.out = self.add_module("out", Dense(hidden, 1, rng=rng))

    def forward(self, feature: Tensor) -> Tensor:
        value = self.out(self.l2(self.l1(feature)))
        return value.reshape(*value.shape[:-1])


def lambda_returns(rewards: Tensor, values: Tensor, discount: float, lam: float) -> Tensor:
    """
    TD(lambda) targets for H imagined transitions.

    rewards: (H, B) reward of transition t -> t + 1
    values:  (H + 1, B) value of state t
    Returns (H, B), bootstrapped from values[H].
    """
    horizon = rewards.shape[0]
    last = values[horizon]
    out: List[Tensor] = []
    for t in reversed(range(horizon)):
        last = rewards[t] + discount * ((1.0 - lam) * values[t + 1] + lam * last)
        out.append(last)
    return stack(list(reversed(out)))


class OfflineDV2Agent(OfflineAgent):
    name = "odv2"

    def __init__(self, cfg, env_config, seed: int = 0):
        super().__init__(cfg, env_config, seed)
        self.rssm_config = RSSMConfig.from_run_config(cfg, env_config.action_dim)
        self.model = RSSMEnsemble(self.rssm_config, seed=seed)
        init = np.random.default_rng(seed + 2)
        features = self.rssm_config.feature_size
        self.actor = LatentActor(features, cfg.wm_hidden, env_config.action_dim, init)
        self.critic = LatentCritic(features, cfg.wm_hidden, init)
        self.slow_critic = LatentCritic(features, cfg.wm_hidden, init)
        self.slow_critic.copy_from(self.critic)
        self.model_opt = Adam(self.model.named_parameters(), cfg.model_lr, clip_norm=cfg.grad_clip)
        self.actor_opt = Adam(self.actor.named_parameters(), cfg.actor_critic_lr, clip_norm=cfg.grad_clip)
        self.critic_opt = Adam(self.critic.named_parameters(), cfg.actor_critic_lr, clip_norm=cfg.grad_clip)
        self.penalty_weight = resolve_penalty_weight(env_config.task, cfg.distribution, cfg.penalty_weight)
        self.model_ready = False
        self._latent: Optional[LatentState] = None
        self._last_action = np.zeros(env_config.action_dim)
        self.agent_updates = 0

    # ------------------------------------------------------------------
    # phases
    # ------------------------------------------------------------------
    def plan(self, dataset: Dataset) -> List[Phase]:
        length = self.sequence_length(dataset)
        per_epoch = steps_per_epoch(dataset.transitions, self.cfg.dv2_batch * length)
        phases = [] if self.model_ready else [Phase("model", self.cfg.model_epochs * per_epoch)]
        return phases + [Phase("agent", self.cfg.dv2_agent_epochs * per_epoch)]

    def sequence_length(self, dataset: Dataset) -> int:
        return min(self.cfg.seq_len, min(e.length for e in dataset.episodes))

    def use_model(self, state: Dict[str, np.ndarray]) -> None:
        """Install trained world model weights; training then skips the model phase."""
        self.model.load_state_dict(state)
        self.model_ready = True

    def train_step(self, phase: str, dataset: Dataset, step: int) -> Tuple[Dict[str, float], List[StepReport]]:
        sequences = sample_sequences(dataset, self.cfg.dv2_batch, self.sequence_length(dataset), rng=self.rng)
        if phase == "model":
            metrics, report = model_step(self.model, self.model_opt, sequences, self.rng)
            return metrics, [report]
        self.model_ready = True
        return self.agent_update(self.start_states(sequences))

    def start_states(self, sequences) -> LatentState:
        """Detached posterior states of the batch, subsampled to imag_starts."""
        with no_grad():
            posterior = self.model.observe(sequences.frames, sequences.actions, rng=self.rng).posterior
        flat = posterior.flatten().detach()
        count = flat.h.shape[0]
        if count > self.cfg.imag_starts:
            flat = flat.take(self.rng.choice(count, size=self.cfg.imag_starts, replace=False))
        return flat

    def imagine(self, start: LatentState) -> Tuple[Imagination, Tensor]:
        entropies: List[Tensor] = []

        def policy(feature: Tensor) -> Tensor:
            action, entropy = self.actor.sample(feature, self.rng)
            entropies.append(entropy)
            return action

        trajectory = imagine(self.model, policy, start, self.cfg.imag_horizon, self.rng)
        return trajectory, stack(entropies)

    def agent_update(self, start: LatentState) -> Tuple[Dict[str, float], List[StepReport]]:
        self.model.zero_grad()
        self.actor_opt.zero_grad()
        trajectory, entropy = self.imagine(start)
        rewards = penalized_reward(trajectory.rewards, trajectory.penalties, self.penalty_weight)
        values = self.slow_critic(trajectory.features)
        returns = lambda_returns(rewards, values, self.cfg.discount, self.cfg.lambda_return)
        actor_loss = -returns.mean() - self.cfg.actor_entropy * entropy.mean()
        actor_loss.backward()
        actor_report = self.actor_opt.step()

        self.critic_opt.zero_grad()
        target = returns.data
        predicted = self.critic(trajectory.features.detach()[:-1])
        critic_loss = ((predicted - target) ** 2).mean() * 0.5
        critic_loss.backward()
        critic_report = self.critic_opt.step()
        self.model.zero_grad()
        self.slow_critic.zero_grad()

        self.agent_updates += 1
        if self.agent_updates % max(1, self.cfg.slow_critic_every) == 0:
            self.slow_critic.copy_from(self.critic)
        metrics = {
            "actor_loss": float(actor_loss.data),
            "critic_loss": float(critic_loss.data),
            "imag_reward": float(trajectory.rewards.data.mean()),
            "penalty": float(trajectory.penalties.mean()),
            "entropy": float(entropy.data.mean()),
        }
        return metrics, [actor_report, critic_report]

    # ------------------------------------------------------------------
    # acting
    # ------------------------------------------------------------------
    def reset(self) -> None:
        self._latent = None
        self._last_action = np.zeros(self.env_config.action_dim)

    def act(self, obs: np.ndarray) -> np.ndarray:
        """Filter the newest frame of the stack into the latent state, then take the policy mode."""
        obs = self.check_observation(obs)
        frame = obs[..., -3:][None]
        with no_grad():
            state = self._latent if self._latent is not None else self.model.initial(1)
            self._latent = self.model.filter_step(state, self._last_action[None], frame)
            action = self.actor.mode(self._latent.feature).data[0]
        self._last_action = np.clip(action, -1.0, 1.0)
        return self._last_action.copy()

    # ------------------------------------------------------------------
    # checkpoints
    # ------------------------------------------------------------------
    def modules(self) -> Dict[str, Module]:
        return {"model": self.model, "actor": self.actor, "critic": self.critic, "slow_critic": self.slow_critic}

    def spec(self) -> Dict[str, Any]:
        return {**super().spec(), "rssm": self.rssm_config.to_dict()}
