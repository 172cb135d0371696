"""
Distraction protocol: train on mixtures where a share of the episodes is
re-rendered with training distractors, then evaluate without distraction,
with training distractors and with held-out test distractors.

Each column is also reported relative to the Original column of the
0% cell at the same severity.
"""
import csv
import io
import logging
from typing import Dict, List, Optional, Sequence, Tuple

from config import ConfigError
from core.data import Dataset, DistractionMix
from core.env import SEVERITIES, TEST_IDS, TRAIN_IDS, Distraction, EnvConfig, HeldOutDistractorError
from core.eval import EvalReport

from .base_protocol import BaseProtocol, Cell, DatasetRequest, SeedRun

logger = logging.getLogger('pobench.protocols.distraction')

FRACTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)
EVAL_COLUMNS = ("Original", "Dis. Train", "Dis. Test")


def parse_fractions(values: Sequence) -> List[float]:
    """Accept shares (0.5) or percentages (50); every value must be one of 0, 25, 50, 75, 100%."""
    fractions = []
    for value in values:
        share = float(value)
        if share > 1.0:
            share /= 100.0
        if not any(abs(share - allowed) < 1e-9 for allowed in FRACTIONS):
            raise ConfigError(f"shift fraction {value} not in {[int(f * 100) for f in FRACTIONS]}%")
        fractions.append(share)
    return sorted(set(fractions))


def default_distribution(algorithm: str) -> str:
    return "random" if algorithm == "odv2" else "medexp"


class DistractionProtocol(BaseProtocol):
    name = "distraction"
    key_columns = ("severity", "fraction", "algorithm")

    def __init__(self, cfg, algorithm: Optional[str] = None, severities: Optional[Sequence[str]] = None,
                 fractions: Optional[Sequence] = None, distribution: Optional[str] = None, **kwargs):
        super().__init__(cfg, **kwargs)
        self.algorithm = algorithm or cfg.algorithm
        self.severities = list(severities or SEVERITIES)
        for severity in self.severities:
            if severity not in SEVERITIES:
                raise ConfigError(f"Unknown distraction severity '{severity}'. Available: {list(SEVERITIES)}")
        self.fractions = parse_fractions(fractions if fractions is not None else FRACTIONS)
        self.distribution = distribution or default_distribution(self.algorithm)

    @staticmethod
    def percent(fraction: float) -> str:
        return str(int(round(fraction * 100)))

    def distracted(self, severity: str, ids: Sequence[int]) -> List[EnvConfig]:
        return [self.env_config.with_distraction(Distraction(severity, i)) for i in ids]

    def plan(self) -> List[Cell]:
        cells = []
        for severity in self.severities:
            eval_envs = {
                "Original": [self.env_config],
                "Dis. Train": self.distracted(severity, TRAIN_IDS),
                "Dis. Test": self.distracted(severity, TEST_IDS),
            }
            for fraction in self.fractions:
                mix = DistractionMix(severity, fraction) if fraction > 0 else None
                request = DatasetRequest(self.env_config, self.distribution, self.n_transitions, mix)
                cells.append(Cell(key={"severity": severity, "fraction": self.percent(fraction),
                                       "algorithm": self.algorithm},
                                  algorithm=self.algorithm, distribution=self.distribution,
                                  datasets=(request,), eval_envs=eval_envs))
        return cells

    def check_purity(self, cell: Cell, dataset: Dataset) -> None:
        held_out = sorted(set(dataset.header.distractor_ids) & set(TEST_IDS))
        if held_out:
            raise HeldOutDistractorError(f"training data of cell {cell.key} carries test distractors {held_out}")
        logger.info(f"purity {cell.key}: training distractor ids {dataset.header.distractor_ids}, "
                    f"none of {TEST_IDS[0]}..{TEST_IDS[-1]}")

    def finish(self, report: EvalReport, cells: List[Cell], results: Dict[Tuple, SeedRun]) -> None:
        normalized = {}
        for severity in self.severities:
            base = report.cell(severity=severity, fraction="0", eval="Original")
            for fraction in self.fractions:
                for column in EVAL_COLUMNS:
                    cell = report.cell(severity=severity, fraction=self.percent(fraction), eval=column)
                    if base is None or base.mean == 0:
                        value = None
                    else:
                        value = 100.0 * cell.mean / base.mean
                    normalized[f"{severity}/{self.percent(fraction)}/{column}"] = value
        report.extras = {"algorithm": self.algorithm, "distribution": self.distribution,
                         "normalized_to_unshifted": normalized}

    def tables(self, report: EvalReport) -> List[Tuple[str, str]]:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["Severity", "Shift %"] + list(EVAL_COLUMNS) + [f"{c} (norm.)" for c in EVAL_COLUMNS])
        normalized = report.extras.get("normalized_to_unshifted", {})
        for severity in self.severities:
            for fraction in self.fractions:
                pct = self.percent(fraction)
                means = [report.cell(severity=severity, fraction=pct, eval=c).mean for c in EVAL_COLUMNS]
                norms = [normalized.get(f"{severity}/{pct}/{c}") for c in EVAL_COLUMNS]
                writer.writerow([severity, pct] + [f"{m:.1f}" for m in means]
                                + ["" if n is None else f"{n:.1f}" for n in norms])
        return [("distraction_table.csv", buffer.getvalue())]
