"""
Base OfflineAgent interface for the offline learners.

An agent trains on a fixed Dataset only and acts on frame stacks. Training
is a template method: the agent plans one or more phases of gradient steps,
the base class runs them against an offline-epoch clock, checks every step
for numeric failure, samples evaluation curves through an optional callback
and counts environment steps taken outside that callback.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from core.data import Dataset
from core.env import EnvConfig, env_steps_taken
from core.eval.clock import OfflineEpochClock
from core.nn import CheckpointMismatchError, Module, ShapeError, StepReport, load_params, save_params, spec_digest

logger = logging.getLogger('pobench.agents')

# evaluator(agent) -> (mean return, std)
Evaluator = Callable[["OfflineAgent"], Tuple[float, float]]


class AgentError(Exception):
    """Base exception for agent errors."""
    pass


class NumericAbortError(AgentError):
    """A loss or gradient went non-finite; training stops."""

    def __init__(self, step: int, diagnostics: Dict[str, Any]):
        super().__init__(f"non-finite training state at step {step}: {diagnostics}")
        self.step = step
        self.diagnostics = diagnostics


class ObservationShapeError(AgentError):
    """act() received an observation of the wrong shape."""
    pass


class RegistryError(AgentError):
    """The agent registry cannot be read or names an unusable class."""
    pass


class UnknownAgentError(AgentError, KeyError):
    """No registry entry for the requested algorithm."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


@dataclass
class Phase:
    name: str
    steps: int


@dataclass
class TrainResult:
    """Outcome of one training run."""
    steps: int = 0
    env_steps: int = 0
    phases: List[Dict[str, Any]] = field(default_factory=list)
    losses: List[Dict[str, Any]] = field(default_factory=list)
    curve: List[Dict[str, Any]] = field(default_factory=list)


class OfflineAgent(ABC):
    """
    Abstract base class for offline agents.

    Subclasses build their networks in __init__, plan their phases and
    implement one gradient step per phase name.
    """

    name: str = ""

    def __init__(self, cfg, env_config: EnvConfig, seed: int = 0):
        self.cfg = cfg
        self.env_config = env_config
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    # ------------------------------------------------------------------
    # subclass interface
    # ------------------------------------------------------------------
    @abstractmethod
    def plan(self, dataset: Dataset) -> List[Phase]:
        """Phases of gradient steps for this dataset."""
        pass

    @abstractmethod
    def train_step(self, phase: str, dataset: Dataset, step: int) -> Tuple[Dict[str, float], List[StepReport]]:
        """
        One gradient step.

        Returns:
            (loss metrics, optimizer reports of this step)
        """
        pass

    @abstractmethod
    def act(self, obs: np.ndarray) -> np.ndarray:
        """Deterministic action in [-1, 1]^d for one frame stack."""
        pass

    @abstractmethod
    def modules(self) -> Dict[str, Module]:
        """Named networks that make up a checkpoint."""
        pass

    def reset(self) -> None:
        """Start of an evaluation episode."""
        pass

    def spec(self) -> Dict[str, Any]:
        return {"agent": self.name, "env": self.env_config.to_dict()}

    # ------------------------------------------------------------------
    # training loop
    # ------------------------------------------------------------------
    def train(self, dataset: Dataset, evaluator: Optional[Evaluator] = None,
              curve_every: Optional[float] = None) -> TrainResult:
        """
        Run every planned phase; evaluate every `curve_every` offline epochs.

        Raises:
            NumericAbortError: a loss went non-finite or an optimizer refused a step
        """
        phases = [p for p in self.plan(dataset) if p.steps > 0]
        total = sum(p.steps for p in phases)
        result = TrainResult(phases=[{"name": p.name, "steps": p.steps} for p in phases])
        if total == 0:
            return result
        clock = OfflineEpochClock(total)
        every = curve_every if curve_every is not None else self.cfg.curve_every
        log_every = max(1, int(self.cfg.log_every))
        env_start = env_steps_taken()
        eval_steps = 0

        for phase in phases:
            logger.info(f"{self.name}: phase '{phase.name}' for {phase.steps} steps")
            for i in range(phase.steps):
                metrics, reports = self.train_step(phase.name, dataset, i)
                clock.tick()
                self._check(clock.step, phase.name, metrics, reports)
                if clock.step % log_every == 0 or clock.done:
                    entry = {"offline_epoch": clock.progress, "step": clock.step, "phase": phase.name, **metrics}
                    result.losses.append(entry)
                    logger.info(f"{self.name} [{phase.name}] epoch {clock.progress:7.2f}: "
                                + " ".join(f"{k} {v:.4f}" for k, v in metrics.items()))
                if evaluator is not None and every and clock.crossed(every):
                    before = env_steps_taken()
                    mean, std = evaluator(self)
                    eval_steps += env_steps_taken() - before
                    result.curve.append({"offline_epoch": clock.progress, "phase": phase.name,
                                         "return": mean, "std": std})

        result.steps = clock.step
        result.env_steps = env_steps_taken() - env_start - eval_steps
        return result

    def _check(self, step: int, phase: str, metrics: Dict[str, float], reports: List[StepReport]) -> None:
        bad = {k: v for k, v in metrics.items() if not np.isfinite(v)}
        refused = [r.diagnostic for r in reports if not r.applied]
        if bad or refused:
            diagnostics = {"phase": phase, "non_finite": bad, "refused": refused, "metrics": metrics}
            logger.error(f"{self.name}: numeric abort at step {step}: {diagnostics}")
            raise NumericAbortError(step, diagnostics)

    # ------------------------------------------------------------------
    # observations and checkpoints
    # ------------------------------------------------------------------
    def check_observation(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        expected = self.env_config.observation_shape
        if obs.shape != expected:
            raise ObservationShapeError(f"{self.name} expected observation {expected}, got {obs.shape}")
        return obs

    @property
    def spec_hash(self) -> str:
        return spec_digest(self.spec())

    def state_dict(self) -> Dict[str, np.ndarray]:
        state: Dict[str, np.ndarray] = {}
        for prefix, module in self.modules().items():
            state.update({f"{prefix}.{k}": v for k, v in module.state_dict().items()})
        return state

    def save(self, path: Union[str, Path], meta: Optional[Dict[str, Any]] = None) -> Path:
        return save_params(path, self.state_dict(), self.spec_hash, {"spec": self.spec(), **(meta or {})})

    def load(self, path: Union[str, Path]) -> Dict[str, Any]:
        """
        Raises:
            CheckpointMismatchError: written for another agent or configuration
        """
        params, header = load_params(path, self.spec_hash)
        for prefix, module in self.modules().items():
            lead = f"{prefix}."
            try:
                module.load_state_dict({k[len(lead):]: v for k, v in params.items() if k.startswith(lead)})
            except ShapeError as e:
                raise CheckpointMismatchError(f"{path}: {e}")
        return header
