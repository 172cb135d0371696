"""
Uncertainty penalty: disagreement of the prior heads, the penalized reward,
and penalty statistics over posterior states of a dataset.
"""
import csv
import io
import math
from typing import Sequence, Tuple

import numpy as np

from core.data import Dataset, sample_sequences
from core.nn import Tensor, as_tensor, no_grad

from .errors import WorldModelError
from .rssm import LatentState, RSSMEnsemble, ensemble_disagreement

PENALTY_STATES = 1024


def disagreement_penalty(model: RSSMEnsemble, h, action=None, z=None) -> np.ndarray:
    """
    Per-row disagreement of the K prior heads at recurrent state h.

    With an action, h is first advanced from (h, z, action); z defaults to zeros.
    """
    with no_grad():
        h = as_tensor(h)
        if action is not None:
            z = as_tensor(z) if z is not None else Tensor(np.zeros(h.shape[:-1] + (model.config.stoch,)))
            h = model.advance(LatentState(h, z), action)
        return ensemble_disagreement(np.stack([p.data for p in model.prior_probs(h)]))


def penalized_reward(reward, penalty, weight: float):
    """r - weight * penalty; works on floats, arrays and Tensors."""
    if weight < 0:
        raise ValueError(f"penalty weight must be >= 0, got {weight}")
    return reward - weight * penalty


def posterior_states(model: RSSMEnsemble, dataset: Dataset, n_states: int, seq_len: int = 50,
                     seed: int = 0) -> LatentState:
    """n_states posterior states drawn from filtered dataset sequences."""
    if n_states < 1 or n_states > dataset.transitions:
        raise WorldModelError(f"n_states must be in [1, {dataset.transitions}], got {n_states}")
    length = max(2, min(seq_len, min(e.length for e in dataset.episodes)))
    rng = np.random.default_rng(seed)
    batch = sample_sequences(dataset, math.ceil(n_states / length), length, rng=rng)
    with no_grad():
        result = model.observe(batch.frames, batch.actions, rng=rng)
    flat = result.posterior.flatten()
    return flat.take(rng.permutation(flat.h.shape[0])[:n_states])


def penalty_stats(model: RSSMEnsemble, dataset: Dataset, n_states: int = PENALTY_STATES,
                  seq_len: int = 50, seed: int = 0) -> Tuple[float, float]:
    """Mean and population std of the penalty over n_states posterior states."""
    states = posterior_states(model, dataset, n_states, seq_len, seed)
    values = disagreement_penalty(model, states.h)
    return float(values.mean()), float(values.std())


def penalty_table(rows: Sequence[Tuple[str, float, float]]) -> str:
    """CSV with columns Dataset Type, Mean, Std."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("Dataset Type", "Mean", "Std."))
    for name, mean, std in rows:
        writer.writerow((name, f"{mean:.4f}", f"{std:.4f}"))
    return buffer.getvalue()
