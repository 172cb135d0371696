"""
Minibatch samplers: n-step transitions for the model-free agents and
contiguous sequences for the world model.

Frames are stored once per timestep; frame stacks are assembled here, padding
the start of an episode with its first frame the same way VisualEnv.reset does.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.env import dequantize

from .dataset import Dataset
from .errors import EmptyDatasetError, SamplingError


@dataclass
class TransitionBatch:
    obs: np.ndarray        # (B, H, W, 3k) float in [0, 1]
    action: np.ndarray     # (B, d)
    reward: np.ndarray     # (B,) discounted n-step sum
    next_obs: np.ndarray   # (B, H, W, 3k), stack ending at t + n
    discount: np.ndarray   # (B,) gamma ** n
    index: np.ndarray      # (B, 2) episode, timestep

    def __len__(self) -> int:
        return len(self.reward)


@dataclass
class SequenceBatch:
    """
    Contiguous windows of L frames.

    actions[:, i] and rewards[:, i] are the action and reward that led INTO
    frame i; position 0 has no predecessor inside the window and is zero.
    """
    frames: np.ndarray     # (B, L, H, W, 3) float in [0, 1]
    actions: np.ndarray    # (B, L, d)
    rewards: np.ndarray    # (B, L)
    timesteps: np.ndarray  # (B, L) frame index within the episode
    episode: np.ndarray    # (B,)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rewards.shape


def _rng(seed, rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(seed)


def frame_stack(frames: np.ndarray, t: int, k: int) -> np.ndarray:
    """Channel-concatenated frames t-k+1 .. t (oldest first) as float."""
    picks = [frames[max(i, 0)] for i in range(t - k + 1, t + 1)]
    return dequantize(np.concatenate(picks, axis=-1))


def n_step_return(rewards: np.ndarray, gamma: float) -> float:
    return float(np.sum(rewards * gamma ** np.arange(len(rewards))))


def valid_indices(dataset: Dataset, n_step: int) -> np.ndarray:
    """(episode, t) pairs with t + n_step <= T."""
    pairs = [(e, t) for e, episode in enumerate(dataset.episodes)
             for t in range(episode.length - n_step + 1)]
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def sample_batch(dataset: Dataset, batch: int, n_step: int = 1, gamma: float = 0.99,
                 seed: Optional[int] = None, rng: Optional[np.random.Generator] = None,
                 frame_stack_size: Optional[int] = None) -> TransitionBatch:
    """
    Uniform n-step transitions that never cross an episode boundary.

    Raises:
        SamplingError: n_step < 1, or batch exceeds the valid transitions
        EmptyDatasetError: no episodes
    """
    if n_step < 1:
        raise SamplingError(f"n_step must be >= 1, got {n_step}")
    if not dataset.episodes:
        raise EmptyDatasetError(f"Dataset '{dataset.label}' has no episodes")
    valid = valid_indices(dataset, n_step)
    if batch < 1 or batch > len(valid):
        raise SamplingError(f"batch {batch} exceeds the {len(valid)} valid transitions for n_step={n_step}")
    k = frame_stack_size or dataset.env_config.frame_stack
    picks = valid[_rng(seed, rng).integers(0, len(valid), size=batch)]

    obs, action, reward, next_obs = [], [], [], []
    for e, t in picks:
        episode = dataset.episodes[e]
        obs.append(frame_stack(episode.frames, t, k))
        next_obs.append(frame_stack(episode.frames, t + n_step, k))
        action.append(episode.actions[t])
        reward.append(n_step_return(episode.rewards[t:t + n_step], gamma))
    return TransitionBatch(
        obs=np.stack(obs),
        action=np.stack(action),
        reward=np.asarray(reward),
        next_obs=np.stack(next_obs),
        discount=np.full(batch, gamma ** n_step),
        index=picks,
    )


def sample_sequences(dataset: Dataset, batch: int, length: int, seed: Optional[int] = None,
                     rng: Optional[np.random.Generator] = None) -> SequenceBatch:
    """
    Contiguous length-L windows, each inside a single episode.

    Raises:
        SamplingError: length < 1 or longer than the shortest episode
    """
    if not dataset.episodes:
        raise EmptyDatasetError(f"Dataset '{dataset.label}' has no episodes")
    shortest = min(e.length for e in dataset.episodes)
    if length < 1 or length > shortest:
        raise SamplingError(f"sequence length {length} must be in [1, {shortest}] (episode length)")
    generator = _rng(seed, rng)
    episodes = generator.integers(0, len(dataset.episodes), size=batch)

    frames, actions, rewards, steps = [], [], [], []
    for e in episodes:
        episode = dataset.episodes[e]
        start = int(generator.integers(0, episode.length - length + 2))  # T + 1 frames
        window = np.arange(start, start + length)
        act = np.zeros((length, episode.actions.shape[1]))
        rew = np.zeros(length)
        act[1:] = episode.actions[window[:-1]]
        rew[1:] = episode.rewards[window[:-1]]
        frames.append(dequantize(episode.frames[window]))
        actions.append(act)
        rewards.append(rew)
        steps.append(window)
    return SequenceBatch(
        frames=np.stack(frames),
        actions=np.stack(actions),
        rewards=np.stack(rewards),
        timesteps=np.stack(steps),
        episode=np.asarray(episodes, dtype=np.int64),
    )
