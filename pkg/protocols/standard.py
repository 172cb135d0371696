"""
Standard protocol: every algorithm on every behavioral distribution of one
task, with final returns, average ranks and training curves.
"""
import csv
import io
from typing import Dict, List, Optional, Sequence, Tuple

from core.eval import EvalReport, average_ranks

from .base_protocol import BaseProtocol, Cell, DatasetRequest, SeedRun

STANDARD_DISTRIBUTIONS = ("random", "mixed", "medium", "medexp", "expert")
RETURN_COLUMN = "return"


class StandardProtocol(BaseProtocol):
    name = "standard"
    key_columns = ("dataset", "algorithm")

    def __init__(self, cfg, algorithms: Optional[Sequence[str]] = None,
                 distributions: Optional[Sequence[str]] = None, **kwargs):
        super().__init__(cfg, **kwargs)
        if algorithms is None:
            from agents import list_available_agents
            algorithms = list(list_available_agents())
        self.algorithms = list(algorithms)
        self.distributions = list(distributions or STANDARD_DISTRIBUTIONS)

    def plan(self) -> List[Cell]:
        cells = []
        for distribution in self.distributions:
            request = DatasetRequest(self.env_config, distribution, self.n_transitions)
            for algorithm in self.algorithms:
                cells.append(Cell(key={"dataset": distribution, "algorithm": algorithm},
                                  algorithm=algorithm, distribution=distribution, datasets=(request,),
                                  eval_envs={RETURN_COLUMN: [self.env_config]}))
        return cells

    def finish(self, report: EvalReport, cells: List[Cell], results: Dict[Tuple, SeedRun]) -> None:
        table: Dict[str, Dict[str, float]] = {}
        for cell in report.cells:
            table.setdefault(cell.key["dataset"], {})[cell.key["algorithm"]] = cell.mean
        report.ranks = average_ranks(table)

    def tables(self, report: EvalReport) -> List[Tuple[str, str]]:
        """Normalized returns with datasets as rows and algorithms as columns, plus the rank row."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["Dataset"] + self.algorithms)
        for distribution in self.distributions:
            row = [distribution]
            for algorithm in self.algorithms:
                cell = report.cell(dataset=distribution, algorithm=algorithm)
                row.append(f"{cell.normalized:.1f} ± {cell.std * 100.0 / cell.max_return:.1f}")
            writer.writerow(row)
        writer.writerow(["Average Rank"] + [f"{report.ranks[a]:.2f}" for a in self.algorithms])
        return [("returns_table.csv", buffer.getvalue())]
