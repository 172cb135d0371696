"""
Scaling protocol: the same distribution generated at multiples of the base
dataset size, with return per size and the percentage gain from the
smallest to the largest size per algorithm.
"""
import csv
import io
from typing import Dict, List, Optional, Sequence, Tuple

from config import ConfigError
from core.eval import EvalReport, percentage_gain

from .base_protocol import BaseProtocol, Cell, DatasetRequest, SeedRun, episode_multiple

MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)
DEFAULT_MULTIPLIERS = (0.5, 1.0, 2.0)
RETURN_COLUMN = "return"


def parse_multipliers(values: Sequence) -> List[float]:
    multipliers = []
    for value in values:
        m = float(str(value).rstrip("x"))
        if m not in MULTIPLIERS:
            raise ConfigError(f"size multiplier {value} not in {list(MULTIPLIERS)}")
        multipliers.append(m)
    return sorted(set(multipliers))


class ScalingProtocol(BaseProtocol):
    name = "scaling"
    key_columns = ("size", "algorithm")

    def __init__(self, cfg, algorithms: Optional[Sequence[str]] = None,
                 multipliers: Optional[Sequence] = None, distribution: Optional[str] = None, **kwargs):
        super().__init__(cfg, **kwargs)
        self.algorithms = list(algorithms or ["odv2", "drqbc", "bc"])
        self.multipliers = parse_multipliers(multipliers if multipliers is not None else DEFAULT_MULTIPLIERS)
        self.distribution = distribution or cfg.distribution

    @staticmethod
    def size_label(multiplier: float) -> str:
        return f"{multiplier:g}x"

    def transitions(self, multiplier: float) -> int:
        return episode_multiple(self.cfg.n_transitions * multiplier, self.cfg.episode_length)

    def plan(self) -> List[Cell]:
        cells = []
        for multiplier in self.multipliers:
            request = DatasetRequest(self.env_config, self.distribution, self.transitions(multiplier))
            for algorithm in self.algorithms:
                cells.append(Cell(key={"size": self.size_label(multiplier), "algorithm": algorithm},
                                  algorithm=algorithm, distribution=self.distribution, datasets=(request,),
                                  eval_envs={RETURN_COLUMN: [self.env_config]}))
        return cells

    def finish(self, report: EvalReport, cells: List[Cell], results: Dict[Tuple, SeedRun]) -> None:
        gains = {}
        for algorithm in self.algorithms:
            by_size = {m: report.cell(size=self.size_label(m), algorithm=algorithm).mean for m in self.multipliers}
            gain = percentage_gain(by_size)
            gains[algorithm] = {"fraction": gain, "percent": None if gain is None else 100.0 * gain}
        report.extras = {
            "distribution": self.distribution,
            "transitions": {self.size_label(m): self.transitions(m) for m in self.multipliers},
            "percentage_gain": gains,
        }

    def tables(self, report: EvalReport) -> List[Tuple[str, str]]:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["Algorithm"] + [self.size_label(m) for m in self.multipliers] + ["Percentage Gain"])
        for algorithm in self.algorithms:
            means = [report.cell(size=self.size_label(m), algorithm=algorithm).mean for m in self.multipliers]
            gain = report.extras["percentage_gain"][algorithm]["percent"]
            writer.writerow([algorithm] + [f"{m:.1f}" for m in means]
                            + ["" if gain is None else f"{gain:+.1f}%"])
        return [("scaling_table.csv", buffer.getvalue())]
