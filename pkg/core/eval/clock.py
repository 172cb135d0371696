"""
Offline-epoch clock: maps gradient steps of a run onto [0, 1000].
"""
from dataclasses import dataclass

OFFLINE_EPOCHS = 1000.0


@dataclass
class OfflineEpochClock:
    total_steps: int
    step: int = 0

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be >= 1, got {self.total_steps}")

    @property
    def progress(self) -> float:
        return self.at(self.step)

    @property
    def done(self) -> bool:
        return self.step >= self.total_steps

    def at(self, step: int) -> float:
        return OFFLINE_EPOCHS * min(step, self.total_steps) / self.total_steps

    def tick(self) -> float:
        if self.done:
            raise ValueError(f"clock already at {self.total_steps} steps")
        self.step += 1
        return self.progress

    def crossed(self, every: float) -> bool:
        """True when the last tick passed a multiple of `every` offline epochs, or finished the run."""
        if self.step == 0:
            return False
        if self.done:
            return True
        return int(self.at(self.step) // every) > int(self.at(self.step - 1) // every)


def steps_per_epoch(transitions: int, samples_per_step: int) -> int:
    return max(1, transitions // max(1, samples_per_step))
