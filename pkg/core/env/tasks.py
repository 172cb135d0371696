"""
Task physics, rewards, scripted controllers and sprites.

Two reach tasks stand in for the locomotion suite: a point mass (easy) and a
two-link arm (harder). Both integrate with a fixed simulator step; one agent
step applies the action for `action_repeat` simulator steps.

Reward per simulator step is exp(-k * d^2) scaled by a small velocity bonus,
so it lies in [0, 1] and equals 1 only at the target at rest.
    pointmass: k = 10, d in arena units
    arm:       k = 10, d in units of the arm's reach
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np

from .errors import UnknownVariantError

SIM_DT = 0.05
VARIANT_LABELS = "ABCDEFGH"


def variant_scale(label: str) -> float:
    """Mass / link-length multiplier: A = 0.5 ... H = 1.5, linear, nominal 1.0 between D and E."""
    if not isinstance(label, str) or len(label) != 1 or label not in VARIANT_LABELS:
        raise UnknownVariantError(f"Unknown dynamics variant '{label}'. Available: {list(VARIANT_LABELS)}")
    return 0.5 + VARIANT_LABELS.index(label) / (len(VARIANT_LABELS) - 1)


@dataclass(frozen=True)
class DynamicsVariant:
    label: str
    scale: float

    @classmethod
    def from_label(cls, label: str) -> "DynamicsVariant":
        return cls(label=label, scale=variant_scale(label))


@dataclass(frozen=True)
class ProprioState:
    positions: np.ndarray
    velocities: np.ndarray
    target: np.ndarray

    def copy(self) -> "ProprioState":
        return ProprioState(self.positions.copy(), self.velocities.copy(), self.target.copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.positions, self.velocities, self.target])


@dataclass(frozen=True)
class Gains:
    kp: float
    kd: float

    def scaled(self, factor: float) -> "Gains":
        return Gains(self.kp * factor, self.kd * factor)


class Task(ABC):
    """Physics and appearance of one reach task."""

    name: str = ""
    action_dim: int = 2
    extent: float = 1.0  # half-width of the rendered world square
    reward_k: float = 10.0
    velocity_weight: float = 0.2
    velocity_scale: float = 0.3
    expert_gains: Gains = Gains(1.0, 0.0)

    @abstractmethod
    def sample_initial(self, rng: np.random.Generator, scale: float) -> ProprioState:
        """Draw a start state from the seeded initial distribution."""
        pass

    @abstractmethod
    def physics_step(self, state: ProprioState, action: np.ndarray, scale: float) -> ProprioState:
        """Advance one simulator step under a clamped action."""
        pass

    @abstractmethod
    def distance_and_speed(self, state: ProprioState, scale: float) -> Tuple[float, float]:
        """Normalized distance to target and speed of the controlled point."""
        pass

    @abstractmethod
    def controller(self, state: ProprioState, gains: Gains, scale: float) -> np.ndarray:
        """Scripted PD output before noise and clipping."""
        pass

    @abstractmethod
    def sprites(self, state: ProprioState, scale: float) -> Dict[str, object]:
        """World-space geometry for the renderer."""
        pass

    def reward(self, state: ProprioState, scale: float) -> float:
        distance, speed = self.distance_and_speed(state, scale)
        shaping = np.exp(-self.reward_k * distance * distance)
        bonus = (1.0 - self.velocity_weight) + self.velocity_weight * np.exp(
            -(speed * speed) / (self.velocity_scale ** 2))
        return float(np.clip(shaping * bonus, 0.0, 1.0))


class PointMassTask(Task):
    name = "pointmass"
    action_dim = 2
    extent = 1.0
    force = 1.0
    damping = 2.0
    expert_gains = Gains(kp=4.0, kd=2.0)

    def sample_initial(self, rng: np.random.Generator, scale: float) -> ProprioState:
        target = rng.uniform(-0.25, 0.25, size=2)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        radius = rng.uniform(0.6, 0.75)
        position = np.clip(target + radius * np.array([np.cos(angle), np.sin(angle)]), -self.extent, self.extent)
        return ProprioState(position, np.zeros(2), target)

    def physics_step(self, state: ProprioState, action: np.ndarray, scale: float) -> ProprioState:
        mass = scale
        accel = (self.force * action - self.damping * state.velocities) / mass
        velocity = state.velocities + SIM_DT * accel
        position = state.positions + SIM_DT * velocity
        hit = np.abs(position) > self.extent
        position = np.clip(position, -self.extent, self.extent)
        velocity = np.where(hit, 0.0, velocity)
        return replace(state, positions=position, velocities=velocity)

    def distance_and_speed(self, state: ProprioState, scale: float) -> Tuple[float, float]:
        return (float(np.linalg.norm(state.positions - state.target)),
                float(np.linalg.norm(state.velocities)))

    def controller(self, state: ProprioState, gains: Gains, scale: float) -> np.ndarray:
        return gains.kp * (state.target - state.positions) - gains.kd * state.velocities

    def sprites(self, state: ProprioState, scale: float) -> Dict[str, object]:
        return {"target": state.target, "points": [state.positions], "point_radius": 0.09, "links": []}


class ArmTask(Task):
    name = "arm"
    action_dim = 2
    extent = 1.0
    link_length = 0.3
    torque = 2.0
    damping = 1.0
    expert_gains = Gains(kp=2.0, kd=1.5)

    def _links(self, scale: float) -> Tuple[float, float]:
        return self.link_length * scale, self.link_length * scale

    def fingertip(self, angles: np.ndarray, scale: float) -> Tuple[np.ndarray, np.ndarray]:
        l1, l2 = self._links(scale)
        elbow = l1 * np.array([np.cos(angles[0]), np.sin(angles[0])])
        tip = elbow + l2 * np.array([np.cos(angles[0] + angles[1]), np.sin(angles[0] + angles[1])])
        return elbow, tip

    def sample_initial(self, rng: np.random.Generator, scale: float) -> ProprioState:
        reach = sum(self._links(scale))
        radius = rng.uniform(0.3, 0.9) * reach
        angle = rng.uniform(0.0, 2.0 * np.pi)
        target = radius * np.array([np.cos(angle), np.sin(angle)])
        angles = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-2.5, 2.5)])
        return ProprioState(angles, np.zeros(2), target)

    def physics_step(self, state: ProprioState, action: np.ndarray, scale: float) -> ProprioState:
        inertia = scale * scale
        accel = (self.torque * action - self.damping * state.velocities) / inertia
        velocity = state.velocities + SIM_DT * accel
        angles = _wrap(state.positions + SIM_DT * velocity)
        return replace(state, positions=angles, velocities=velocity)

    def distance_and_speed(self, state: ProprioState, scale: float) -> Tuple[float, float]:
        l1, l2 = self._links(scale)
        _, tip = self.fingertip(state.positions, scale)
        q1, q12 = state.positions[0], state.positions[0] + state.positions[1]
        w1, w2 = state.velocities
        tip_velocity = np.array([-l1 * np.sin(q1) * w1 - l2 * np.sin(q12) * (w1 + w2),
                                 l1 * np.cos(q1) * w1 + l2 * np.cos(q12) * (w1 + w2)])
        reach = l1 + l2
        return (float(np.linalg.norm(tip - state.target) / reach),
                float(np.linalg.norm(tip_velocity) / reach))

    def inverse_kinematics(self, target: np.ndarray, elbow_sign: float, scale: float) -> np.ndarray:
        l1, l2 = self._links(scale)
        radius2 = float(target @ target)
        cos_elbow = np.clip((radius2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0)
        elbow = elbow_sign * np.arccos(cos_elbow)
        shoulder = np.arctan2(target[1], target[0]) - np.arctan2(l2 * np.sin(elbow), l1 + l2 * np.cos(elbow))
        return _wrap(np.array([shoulder, elbow]))

    def controller(self, state: ProprioState, gains: Gains, scale: float) -> np.ndarray:
        sign = 1.0 if state.positions[1] >= 0 else -1.0
        goal = self.inverse_kinematics(state.target, sign, scale)
        return gains.kp * _wrap(goal - state.positions) - gains.kd * state.velocities

    def sprites(self, state: ProprioState, scale: float) -> Dict[str, object]:
        elbow, tip = self.fingertip(state.positions, scale)
        base = np.zeros(2)
        return {"target": state.target, "points": [tip], "point_radius": 0.05,
                "links": [(base, elbow), (elbow, tip)]}


def _wrap(angles: np.ndarray) -> np.ndarray:
    return (angles + np.pi) % (2.0 * np.pi) - np.pi


TASKS: Dict[str, Task] = {
    "pointmass": PointMassTask(),
    "arm": ArmTask(),
}


def get_task(name: str) -> Task:
    if name not in TASKS:
        raise KeyError(f"Task '{name}' not found. Available tasks: {list(TASKS)}")
    return TASKS[name]
