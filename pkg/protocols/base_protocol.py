"""
Base protocol class shared by the experiment protocols.

A protocol plans a grid of cells (dataset x algorithm [x condition]),
resolves every dataset through the DatasetStore before any training starts,
runs one job per (cell, seed) on the work queue and merges the results into
an EvalReport written under <output_root>/reports/<protocol>/<env>/.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from config import ConfigError
from core.data import Dataset, DatasetStore, DistractionMix, DistributionSettings
from core.env import EnvConfig
from core.eval import CellResult, EvalReport, evaluate_configs, final_performance
from core.jobs import Job, run_jobs

logger = logging.getLogger('pobench.protocols')


class ProtocolError(Exception):
    """A protocol invariant was violated while running a cell."""
    pass


@dataclass(frozen=True)
class DatasetRequest:
    env_config: EnvConfig
    label: str
    n_transitions: int
    mix: Optional[DistractionMix] = None


@dataclass
class Cell:
    """
    One protocol cell: the datasets an agent trains on and the evaluation
    environments of each report column. The first eval column drives the
    training curve.
    """
    key: Dict[str, str]
    algorithm: str
    distribution: str
    datasets: Tuple[DatasetRequest, ...]
    eval_envs: Dict[str, List[EnvConfig]]
    overrides: Dict[str, Any] = field(default_factory=dict)

    @property
    def ident(self) -> Tuple[str, ...]:
        return tuple(self.key.values())


@dataclass
class SeedRun:
    """Outcome of one (cell, seed) job."""
    final: Dict[str, float]
    curve: List[Dict[str, Any]]
    steps: int = 0
    env_steps: int = 0


def episode_multiple(n_transitions: float, episode_length: int) -> int:
    """Round a transition count to whole episodes (at least one)."""
    return max(1, int(round(n_transitions / episode_length))) * episode_length


class BaseProtocol(ABC):
    """
    Abstract base class for protocols.

    Subclasses plan their cells and may override how a cell's datasets are
    combined, which held-out conditions are checked and what extra tables
    the report carries.
    """

    name: str = ""
    key_columns: Sequence[str] = ()

    def __init__(self, cfg, store: Optional[DatasetStore] = None, output_root: Optional[str] = None):
        self.cfg = cfg
        self.output_root = Path(output_root or cfg.output_root)
        self.store = store or DatasetStore(self.output_root, DistributionSettings.from_run_config(cfg))
        self.env_config = EnvConfig.from_run_config(cfg).with_distraction(None)
        self.purity_log: List[Dict[str, Any]] = []

    # ------------------------------------------------------------------
    # subclass interface
    # ------------------------------------------------------------------
    @abstractmethod
    def plan(self) -> List[Cell]:
        """Cells of this protocol in report order."""
        pass

    def training_dataset(self, cell: Cell, datasets: Dict[DatasetRequest, Dataset]) -> Dataset:
        """The dataset a cell trains on; single-request cells use it as is."""
        return datasets[cell.datasets[0]]

    def check_purity(self, cell: Cell, dataset: Dataset) -> None:
        """Raise when a training dataset carries a held-out condition."""
        pass

    def tables(self, report: EvalReport) -> List[Tuple[str, str]]:
        """Extra (file name, csv text) tables written next to the report."""
        return []

    def finish(self, report: EvalReport, cells: List[Cell], results: Dict[Tuple, SeedRun]) -> None:
        """Fill ranks and extras once every cell has run."""
        pass

    # ------------------------------------------------------------------
    # template
    # ------------------------------------------------------------------
    @property
    def report_dir(self) -> Path:
        return self.output_root / "reports" / self.name / self.cfg.task

    @property
    def n_transitions(self) -> int:
        return episode_multiple(self.cfg.n_transitions, self.cfg.episode_length)

    def run(self) -> EvalReport:
        """
        Plan, resolve datasets, train every (cell, seed) and write the report.

        Raises:
            MissingDatasetError: a cell's dataset is absent and generation is off
            NumericAbortError: a training run diverged
        """
        cells = self.plan()
        if not cells:
            raise ConfigError(f"protocol '{self.name}' planned no cells")
        logger.info(f"{self.name}: {len(cells)} cells x {self.cfg.seeds} seeds on {self.cfg.task}")
        datasets = self.resolve(cells)
        training = {}
        for cell in cells:
            dataset = self.training_dataset(cell, datasets)
            self.check_purity(cell, dataset)
            self.purity_log.append({**cell.key, "variants": list(dataset.header.variants),
                                    "distractor_ids": list(dataset.header.distractor_ids)})
            training[cell.ident] = dataset
        results = self.execute(cells, training)
        report = self.summarize(cells, results)
        self.finish(report, cells, results)
        report.write(self.report_dir, self.tables(report))
        if report.curves:
            from core.rendering import mean_curves, render_curves
            image = render_curves(mean_curves(report.curves, self.key_columns), self.env_config.max_return,
                                  title=f"{self.name} / {self.cfg.task}")
            image.save(self.report_dir / "curves.png")
        logger.info(f"{self.name}: report written to {self.report_dir}")
        return report

    def resolve(self, cells: List[Cell]) -> Dict[DatasetRequest, Dataset]:
        """Load or generate every requested dataset once, in plan order."""
        datasets: Dict[DatasetRequest, Dataset] = {}
        for cell in cells:
            for request in cell.datasets:
                if request not in datasets:
                    datasets[request] = self.store.get(request.env_config, request.label, request.n_transitions,
                                                       self.cfg.seed, request.mix, generate=self.cfg.generate)
        return datasets

    def execute(self, cells: List[Cell], training: Dict[Tuple, Dataset]) -> Dict[Tuple, SeedRun]:
        jobs = []
        for cell in cells:
            for seed_index in range(self.cfg.seeds):
                jobs.append(Job((cell.ident, seed_index), self._bind(cell, training[cell.ident], seed_index)))
        return run_jobs(jobs, self.cfg.workers)

    def _bind(self, cell: Cell, dataset: Dataset, seed_index: int):
        return lambda: self.run_seed(cell, dataset, seed_index)

    def cell_config(self, cell: Cell):
        return self.cfg.replace(algorithm=cell.algorithm, distribution=cell.distribution, **cell.overrides)

    def create_agent(self, cell: Cell, dataset: Dataset, seed_index: int):
        from agents import get_agent
        cfg = self.cell_config(cell)
        return get_agent(cell.algorithm, cfg, dataset.env_config.with_variant(""), cfg.seed + seed_index)

    def run_seed(self, cell: Cell, dataset: Dataset, seed_index: int, agent=None) -> SeedRun:
        """
        Train one agent and score every eval column.

        The curve column's final score is the mean of the last checkpoints;
        other columns are evaluated once after training.
        """
        agent = agent or self.create_agent(cell, dataset, seed_index)
        eval_seed = self.cfg.seed + 1000 + seed_index
        columns = list(cell.eval_envs)
        episodes = self.cfg.eval_episodes

        def evaluator(trained):
            summary = evaluate_configs(trained, cell.eval_envs[columns[0]], episodes, eval_seed)
            return summary.mean, summary.std

        result = agent.train(dataset, evaluator=evaluator)
        if result.env_steps != 0:
            raise ProtocolError(f"cell {cell.key} took {result.env_steps} environment steps during training")
        final = {}
        if result.curve:
            final[columns[0]] = final_performance([p["return"] for p in result.curve], self.cfg.final_window)
        for column in columns:
            if column not in final:
                final[column] = evaluate_configs(agent, cell.eval_envs[column], episodes, eval_seed).mean
        curve = [{**cell.key, "seed": seed_index, "offline_epoch": p["offline_epoch"], "return": p["return"]}
                 for p in result.curve]
        return SeedRun(final=final, curve=curve, steps=result.steps, env_steps=result.env_steps)

    def summarize(self, cells: List[Cell], results: Dict[Tuple, SeedRun]) -> EvalReport:
        report = EvalReport(protocol=self.name, env=self.cfg.task, columns=list(self.key_columns) + ["eval"])
        max_return = self.env_config.max_return
        for cell in cells:
            runs = [results[(cell.ident, s)] for s in range(self.cfg.seeds)]
            for column in cell.eval_envs:
                report.cells.append(CellResult(key={**cell.key, "eval": column},
                                               returns=[run.final[column] for run in runs],
                                               max_return=max_return))
            for run in runs:
                report.curves.extend(run.curve)
        report.meta = {
            "seeds": self.cfg.seeds,
            "seed": self.cfg.seed,
            "n_transitions": self.n_transitions,
            "eval_episodes": self.cfg.eval_episodes,
            "env": self.env_config.to_dict(),
            "purity": self.purity_log,
        }
        return report
