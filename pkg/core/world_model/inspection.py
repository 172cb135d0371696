"""
Decoding posterior states of a recorded episode back into frames.
"""
from typing import Tuple

import numpy as np

from core.data import EpisodeRecord
from core.env import dequantize
from core.nn import no_grad

from .rssm import RSSMEnsemble, reconstruct


def reconstruct_episode(model: RSSMEnsemble, episode: EpisodeRecord, every: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Filter every frame of an episode and decode the posterior.

    Returns:
        (ground truth, reconstruction), each (n, S, S, 3) for frames 0, every, 2*every, ...
    """
    if every < 1:
        raise ValueError(f"every must be >= 1, got {every}")
    frames = dequantize(episode.frames)
    action_dim = episode.actions.shape[1]
    truth, decoded = [], []
    with no_grad():
        state = model.initial(1)
        for t in range(len(frames)):
            action = episode.actions[t - 1] if t > 0 else np.zeros(action_dim)
            state = model.filter_step(state, action[None], frames[t][None])
            if t % every == 0:
                truth.append(frames[t])
                decoded.append(reconstruct(model, state)[0])
    return np.stack(truth), np.stack(decoded)
