"""
Procedural background distractors: drifting colour tiles plus correlated noise.

Severity sets the contrast of the pattern against the plain background and how
fast it drifts. The distractor id seeds the palette, drift direction and noise
field. Ids 0-9 are used for training data, 10-19 only for held-out evaluation.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np

BACKGROUND = np.array([0.45, 0.45, 0.5])

# severity -> (contrast, tile drift in pixels per step at 32 px)
SEVERITIES: Dict[str, Tuple[float, float]] = {
    "low": (0.2, 0.5),
    "moderate": (0.5, 1.0),
    "high": (0.9, 2.0),
}

TRAIN_IDS = tuple(range(0, 10))
TEST_IDS = tuple(range(10, 20))

TILE_GRID = 4
NOISE_WAVES = 4
TILE_WEIGHT = 0.7


@dataclass(frozen=True)
class Distraction:
    severity: str
    distractor_id: int

    def __post_init__(self):
        if self.severity not in SEVERITIES:
            raise ValueError(f"Unknown severity '{self.severity}'. Available: {list(SEVERITIES)}")
        if not 0 <= self.distractor_id < len(TRAIN_IDS) + len(TEST_IDS):
            raise ValueError(f"Distractor id {self.distractor_id} outside 0..{len(TRAIN_IDS) + len(TEST_IDS) - 1}")

    @property
    def is_test(self) -> bool:
        return self.distractor_id in TEST_IDS

    def to_dict(self) -> Dict[str, object]:
        return {"severity": self.severity, "distractor_id": self.distractor_id}


@lru_cache(maxsize=128)
def _basis(distractor_id: int, size: int):
    rng = np.random.default_rng(10_000 + distractor_id)
    palette = rng.uniform(0.0, 1.0, size=(TILE_GRID, TILE_GRID, 3))
    heading = rng.uniform(0.0, 2.0 * np.pi)
    direction = np.array([np.cos(heading), np.sin(heading)])
    freqs = rng.integers(1, 4, size=(NOISE_WAVES, 3, 2)).astype(np.float64)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(NOISE_WAVES, 3))
    rates = rng.uniform(0.02, 0.08, size=(NOISE_WAVES, 3))
    amps = rng.uniform(0.5, 1.0, size=(NOISE_WAVES, 3))
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return palette, direction, freqs, phases, rates, amps, ys, xs


def pattern(distractor_id: int, size: int, step_index: int, speed: float) -> np.ndarray:
    """Pattern in [0, 1], shape (size, size, 3), for one step."""
    palette, direction, freqs, phases, rates, amps, ys, xs = _basis(distractor_id, size)
    tile = max(1, size // TILE_GRID)
    shift = speed * (size / 32.0) * step_index * direction
    rows = np.floor((ys + shift[1]) / tile).astype(np.int64) % TILE_GRID
    cols = np.floor((xs + shift[0]) / tile).astype(np.int64) % TILE_GRID
    tiles = palette[rows, cols]

    # correlated noise: a few low-frequency travelling waves per channel
    u, v = xs / size, ys / size
    noise = np.zeros((size, size, 3))
    for w in range(NOISE_WAVES):
        arg = 2.0 * np.pi * (freqs[w, :, 0] * u[..., None] + freqs[w, :, 1] * v[..., None])
        noise += amps[w] * np.sin(arg + phases[w] + rates[w] * speed * step_index * 2.0 * np.pi)
    noise = 0.5 + 0.5 * noise / amps.sum(axis=0)
    return TILE_WEIGHT * tiles + (1.0 - TILE_WEIGHT) * noise


def background(size: int, distraction, step_index: int) -> np.ndarray:
    """Plain background, or the distractor composited at the severity's contrast."""
    plain = np.broadcast_to(BACKGROUND, (size, size, 3)).copy()
    if distraction is None:
        return plain
    contrast, speed = SEVERITIES[distraction.severity]
    shifted = plain + contrast * (pattern(distraction.distractor_id, size, step_index, speed) - 0.5)
    return np.clip(shifted, 0.0, 1.0)
