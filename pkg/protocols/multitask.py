"""
Multitask dynamics protocol: pool equal shares of data from variants
B, C, F and G, then evaluate on the training variants, on the interpolation
variants D and E and on the extrapolation variants A and H.
"""
import csv
import io
import logging
from functools import reduce
from typing import Dict, List, Optional, Sequence, Tuple

from core.data import Dataset, concat
from core.eval import EvalReport

from .base_protocol import BaseProtocol, Cell, DatasetRequest, ProtocolError, SeedRun, episode_multiple

logger = logging.getLogger('pobench.protocols.multitask')

TRAIN_VARIANTS = ("B", "C", "F", "G")
INTERP_VARIANTS = ("D", "E")
EXTRAP_VARIANTS = ("A", "H")
EVAL_COLUMNS = ("Train", "Interp.", "Extrap.")


class MultitaskProtocol(BaseProtocol):
    name = "multitask"
    key_columns = ("dataset", "algorithm")

    def __init__(self, cfg, algorithms: Optional[Sequence[str]] = None, distribution: str = "medexp", **kwargs):
        super().__init__(cfg, **kwargs)
        self.algorithms = list(algorithms or [cfg.algorithm])
        self.distribution = distribution

    @property
    def per_variant(self) -> int:
        return episode_multiple(self.cfg.n_transitions / len(TRAIN_VARIANTS), self.cfg.episode_length)

    def variants(self, labels: Sequence[str]):
        return [self.env_config.with_variant(v) for v in labels]

    def plan(self) -> List[Cell]:
        requests = tuple(DatasetRequest(config, self.distribution, self.per_variant)
                         for config in self.variants(TRAIN_VARIANTS))
        eval_envs = {
            "Train": self.variants(TRAIN_VARIANTS),
            "Interp.": self.variants(INTERP_VARIANTS),
            "Extrap.": self.variants(EXTRAP_VARIANTS),
        }
        return [Cell(key={"dataset": self.distribution, "algorithm": algorithm}, algorithm=algorithm,
                     distribution=self.distribution, datasets=requests, eval_envs=eval_envs)
                for algorithm in self.algorithms]

    def training_dataset(self, cell: Cell, datasets: Dict[DatasetRequest, Dataset]) -> Dataset:
        parts = [datasets[request] for request in cell.datasets]
        return reduce(lambda a, b: concat(a, b, label=self.distribution, allow_variants=True), parts)

    def check_purity(self, cell: Cell, dataset: Dataset) -> None:
        unexpected = sorted(set(dataset.header.variants) - set(TRAIN_VARIANTS))
        if unexpected:
            raise ProtocolError(f"training data of cell {cell.key} carries held-out variants {unexpected}")
        counts = {v: sum(1 for e in dataset.episodes if e.variant == v) for v in TRAIN_VARIANTS}
        if len(set(counts.values())) != 1:
            raise ProtocolError(f"unequal variant shares in pooled data: {counts}")
        logger.info(f"purity {cell.key}: training variants {dataset.header.variants}, episodes per variant {counts}")

    def finish(self, report: EvalReport, cells: List[Cell], results: Dict[Tuple, SeedRun]) -> None:
        report.extras = {
            "train_variants": list(TRAIN_VARIANTS),
            "interp_variants": list(INTERP_VARIANTS),
            "extrap_variants": list(EXTRAP_VARIANTS),
            "transitions_per_variant": self.per_variant,
        }

    def tables(self, report: EvalReport) -> List[Tuple[str, str]]:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["Algorithm"] + list(EVAL_COLUMNS))
        for algorithm in self.algorithms:
            cells = [report.cell(algorithm=algorithm, eval=c) for c in EVAL_COLUMNS]
            writer.writerow([algorithm] + [f"{c.normalized:.1f} ± {c.std * 100.0 / c.max_return:.1f}" for c in cells])
        return [("multitask_table.csv", buffer.getvalue())]
