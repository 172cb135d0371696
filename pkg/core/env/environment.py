"""
EnvConfig and the VisualEnv episode loop.
"""
import hashlib
import json
import logging
import threading
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Deque, Dict, List, Optional, Tuple

import numpy as np

from .distractors import Distraction
from .errors import ActionShapeError, EnvNotResetError
from .render import render
from .tasks import ProprioState, Task, get_task, variant_scale

logger = logging.getLogger('pobench.env')

_counter = threading.local()


def env_steps_taken() -> int:
    """Agent steps taken by VisualEnv instances in the current thread."""
    return getattr(_counter, "steps", 0)


def _count_step() -> None:
    _counter.steps = env_steps_taken() + 1


@dataclass(frozen=True)
class EnvConfig:
    task: str = "pointmass"
    variant: str = ""
    distraction: Optional[Distraction] = None
    render_size: int = 32
    action_repeat: int = 2
    frame_stack: int = 3
    episode_length: int = 500

    def __post_init__(self):
        get_task(self.task)
        if self.variant:
            variant_scale(self.variant)
        if self.render_size < 16:
            raise ValueError(f"render_size must be >= 16, got {self.render_size}")
        if self.action_repeat < 1:
            raise ValueError(f"action_repeat must be >= 1, got {self.action_repeat}")
        if self.frame_stack < 1 or self.episode_length < 1:
            raise ValueError("frame_stack and episode_length must be >= 1")

    @property
    def scale(self) -> float:
        return variant_scale(self.variant) if self.variant else 1.0

    @property
    def task_impl(self) -> Task:
        return get_task(self.task)

    @property
    def action_dim(self) -> int:
        return self.task_impl.action_dim

    @property
    def frame_shape(self) -> Tuple[int, int, int]:
        return (self.render_size, self.render_size, 3)

    @property
    def observation_shape(self) -> Tuple[int, int, int]:
        return (self.render_size, self.render_size, 3 * self.frame_stack)

    @property
    def max_return(self) -> float:
        return float(self.episode_length * self.action_repeat)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "task": self.task,
            "variant": self.variant,
            "distraction": self.distraction.to_dict() if self.distraction else None,
            "render_size": self.render_size,
            "action_repeat": self.action_repeat,
            "frame_stack": self.frame_stack,
            "episode_length": self.episode_length,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnvConfig":
        distraction = data.get("distraction")
        return cls(
            task=data["task"],
            variant=data.get("variant", ""),
            distraction=Distraction(**distraction) if distraction else None,
            render_size=data.get("render_size", 32),
            action_repeat=data.get("action_repeat", 2),
            frame_stack=data.get("frame_stack", 3),
            episode_length=data.get("episode_length", 500),
        )

    @classmethod
    def from_run_config(cls, cfg) -> "EnvConfig":
        distraction = None
        if cfg.distraction_severity:
            distraction = Distraction(cfg.distraction_severity, cfg.distractor_id)
        return cls(task=cfg.task, variant=cfg.variant, distraction=distraction,
                   render_size=cfg.render_size, action_repeat=cfg.action_repeat,
                   frame_stack=cfg.frame_stack, episode_length=cfg.episode_length)

    def config_hash(self, include_distraction: bool = True, include_variant: bool = True) -> str:
        data = self.to_dict()
        if not include_distraction:
            data["distraction"] = None
        if not include_variant:
            data["variant"] = None
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()[:16]

    def with_distraction(self, distraction: Optional[Distraction]) -> "EnvConfig":
        return replace(self, distraction=distraction)

    def with_variant(self, variant: str) -> "EnvConfig":
        return replace(self, variant=variant)


@dataclass
class StepResult:
    frames: Optional[np.ndarray]
    reward: float
    done: bool
    diagnostics: Dict[str, Any] = field(default_factory=dict)


class VisualEnv:
    """
    One single-threaded episode stream for an EnvConfig.

    With render_frames=False frames are skipped entirely (used for calibration).
    """

    def __init__(self, config: EnvConfig, render_frames: bool = True):
        self.config = config
        self.task = config.task_impl
        self.scale = config.scale
        self.render_enabled = render_frames
        self.last_frame: Optional[np.ndarray] = None
        self._state: Optional[ProprioState] = None
        self._stack: Deque[np.ndarray] = deque(maxlen=config.frame_stack)
        self._t = 0
        self._done = True
        self.clamped_actions = 0

    @property
    def state(self) -> ProprioState:
        if self._state is None:
            raise EnvNotResetError("Environment not reset")
        return self._state

    @property
    def step_index(self) -> int:
        return self._t

    def render_frame(self, state: Optional[ProprioState] = None, step_index: Optional[int] = None) -> np.ndarray:
        return render(self.task, state if state is not None else self.state, self.scale,
                      self.config.render_size, self.config.distraction,
                      self._t if step_index is None else step_index)

    def observation(self) -> Optional[np.ndarray]:
        if not self.render_enabled:
            return None
        return np.concatenate(list(self._stack), axis=-1)

    def reset(self, seed: int) -> Tuple[Optional[np.ndarray], ProprioState]:
        rng = np.random.default_rng(seed)
        self._state = self.task.sample_initial(rng, self.scale)
        self._t = 0
        self._done = False
        self.clamped_actions = 0
        self._stack.clear()
        if self.render_enabled:
            first = self.render_frame()
            for _ in range(self.config.frame_stack):
                self._stack.append(first)
            self.last_frame = first
        return self.observation(), self._state.copy()

    def step(self, action) -> StepResult:
        if self._state is None or self._done:
            raise EnvNotResetError("step() called before reset() or after the episode ended")
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape != (self.task.action_dim,):
            raise ActionShapeError(f"Expected action of shape ({self.task.action_dim},), got {action.shape}")
        clamped = bool(np.any(np.abs(action) > 1.0)) or not np.all(np.isfinite(action))
        if clamped:
            self.clamped_actions += 1
            action = np.clip(np.nan_to_num(action), -1.0, 1.0)

        sim_rewards: List[float] = []
        state = self._state
        for _ in range(self.config.action_repeat):
            state = self.task.physics_step(state, action, self.scale)
            sim_rewards.append(self.task.reward(state, self.scale))
        self._state = state
        self._t += 1
        self._done = self._t >= self.config.episode_length
        _count_step()

        if self.render_enabled:
            frame = self.render_frame()
            self._stack.append(frame)
            self.last_frame = frame
        return StepResult(
            frames=self.observation(),
            reward=float(sum(sim_rewards)),
            done=self._done,
            diagnostics={"clamped": clamped, "sim_rewards": sim_rewards, "step": self._t},
        )
