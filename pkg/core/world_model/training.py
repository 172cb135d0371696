"""
World model fitting and checkpoints.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from core.data import Dataset, SequenceBatch, sample_sequences
from core.nn import Adam, StepReport, load_into, save_params

from .rssm import RSSMConfig, RSSMEnsemble

logger = logging.getLogger('pobench.world_model')

StepCallback = Callable[[int, Dict[str, float], StepReport], None]


@dataclass
class FitReport:
    steps: int = 0
    refused: int = 0
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.history[-1]["total"] if self.history else float("nan")


def model_step(model: RSSMEnsemble, optimizer: Adam, sequences: SequenceBatch, rng: np.random.Generator
               ) -> Tuple[Dict[str, float], StepReport]:
    """One gradient step on the observe() loss of a sequence batch."""
    model.zero_grad()
    result = model.observe(sequences.frames, sequences.actions, sequences.rewards, rng=rng)
    result.loss.backward()
    return result.metrics, optimizer.step()


def fit(model: RSSMEnsemble, dataset: Dataset, steps: int, batch: int, seq_len: int, lr: float,
        grad_clip: float = 100.0, seed: int = 0, log_every: int = 100,
        on_step: Optional[StepCallback] = None, optimizer: Optional[Adam] = None) -> FitReport:
    """
    Minimize the observe() loss on sampled sequences for `steps` updates.

    `on_step` sees every update's metrics and optimizer report and may raise
    to stop training.
    """
    optimizer = optimizer or Adam(model.named_parameters(), lr, clip_norm=grad_clip)
    length = min(seq_len, min(e.length for e in dataset.episodes))
    rng = np.random.default_rng(seed)
    report = FitReport()
    for step in range(steps):
        sequences = sample_sequences(dataset, batch, length, rng=rng)
        metrics, step_report = model_step(model, optimizer, sequences, rng)
        report.steps += 1
        report.refused += 0 if step_report.applied else 1
        report.history.append(metrics)
        if log_every and (step + 1) % log_every == 0:
            m = metrics
            logger.info(f"model step {step + 1}/{steps}: total {m['total']:.2f} image {m['image']:.2f} "
                        f"reward {m.get('reward', 0.0):.4f} kl {m['kl_value']:.3f}")
        if on_step is not None:
            on_step(step, metrics, step_report)
    model.zero_grad()
    return report


def save_model(model: RSSMEnsemble, path: Union[str, Path], meta: Optional[Dict] = None) -> Path:
    payload = {"rssm": model.config.to_dict(), **(meta or {})}
    return save_params(path, model.state_dict(), model.spec_hash, payload)


def load_model(path: Union[str, Path], config: RSSMConfig) -> RSSMEnsemble:
    """
    Raises:
        CheckpointMismatchError: the file was written for a different configuration
    """
    model = RSSMEnsemble(config)
    load_into(model, path, config.spec_hash())
    return model
