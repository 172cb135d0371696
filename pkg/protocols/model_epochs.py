"""
Model-epoch sweep: one world model per seed is trained in stages; at each
checkpoint its weights seed a fresh Offline DV2 policy, giving return as a
function of world model training.
"""
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import ConfigError
from core.data import Dataset
from core.eval import EvalReport, steps_per_epoch
from core.jobs import Job, run_jobs
from core.nn import Adam
from core.world_model import RSSMConfig, RSSMEnsemble, fit

from .base_protocol import BaseProtocol, Cell, DatasetRequest, SeedRun

RETURN_COLUMN = "return"


def default_checkpoints(model_epochs: int) -> List[int]:
    """Eighth, quarter, half and full of the configured model epochs."""
    return sorted({max(1, int(round(model_epochs * share))) for share in (0.125, 0.25, 0.5, 1.0)})


def parse_checkpoints(values: Sequence) -> List[int]:
    checkpoints = [int(v) for v in values]
    if not checkpoints or checkpoints[0] < 1:
        raise ConfigError(f"model epoch checkpoints must be positive, got {checkpoints}")
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ConfigError(f"model epoch checkpoints must be increasing, got {checkpoints}")
    return checkpoints


class ModelEpochProtocol(BaseProtocol):
    name = "model_epochs"
    key_columns = ("model_epochs", "algorithm")

    def __init__(self, cfg, checkpoints: Optional[Sequence] = None, distribution: Optional[str] = None, **kwargs):
        super().__init__(cfg, **kwargs)
        self.checkpoints = parse_checkpoints(checkpoints or default_checkpoints(cfg.model_epochs))
        self.distribution = distribution or cfg.distribution

    def plan(self) -> List[Cell]:
        request = DatasetRequest(self.env_config, self.distribution, self.n_transitions)
        return [Cell(key={"model_epochs": str(epochs), "algorithm": "odv2"}, algorithm="odv2",
                     distribution=self.distribution, datasets=(request,),
                     eval_envs={RETURN_COLUMN: [self.env_config]}, overrides={"model_epochs": epochs})
                for epochs in self.checkpoints]

    def execute(self, cells: List[Cell], training: Dict[Tuple, Dataset]) -> Dict[Tuple, SeedRun]:
        dataset = training[cells[0].ident]
        jobs = [Job(("sweep", seed_index), self._bind_sweep(cells, dataset, seed_index))
                for seed_index in range(self.cfg.seeds)]
        merged: Dict[Tuple, SeedRun] = {}
        for runs in run_jobs(jobs, self.cfg.workers).values():
            merged.update(runs)
        return merged

    def _bind_sweep(self, cells: List[Cell], dataset: Dataset, seed_index: int):
        return lambda: self.sweep_seed(cells, dataset, seed_index)

    def sweep_seed(self, cells: List[Cell], dataset: Dataset, seed_index: int) -> Dict[Tuple, SeedRun]:
        from agents import NumericAbortError

        cfg = self.cell_config(cells[0])
        seed = cfg.seed + seed_index
        model = RSSMEnsemble(RSSMConfig.from_run_config(cfg, dataset.env_config.action_dim), seed=seed)
        optimizer = Adam(model.named_parameters(), cfg.model_lr, clip_norm=cfg.grad_clip)
        length = min(cfg.seq_len, min(e.length for e in dataset.episodes))
        per_epoch = steps_per_epoch(dataset.transitions, cfg.dv2_batch * length)

        def abort_on_failure(step, metrics, report):
            bad = {k: v for k, v in metrics.items() if not np.isfinite(v)}
            if bad or not report.applied:
                raise NumericAbortError(step, {"phase": "model", "non_finite": bad, "refused": report.diagnostic})

        runs: Dict[Tuple, SeedRun] = {}
        trained = 0
        for cell in cells:
            epochs = cell.overrides["model_epochs"]
            fit(model, dataset, (epochs - trained) * per_epoch, cfg.dv2_batch, length, cfg.model_lr,
                grad_clip=cfg.grad_clip, seed=seed * 1000 + epochs, log_every=cfg.log_every,
                on_step=abort_on_failure, optimizer=optimizer)
            trained = epochs
            agent = self.create_agent(cell, dataset, seed_index)
            agent.use_model(model.state_dict())
            runs[(cell.ident, seed_index)] = self.run_seed(cell, dataset, seed_index, agent=agent)
        return runs

    def finish(self, report: EvalReport, cells: List[Cell], results: Dict[Tuple, SeedRun]) -> None:
        report.extras = {
            "distribution": self.distribution,
            "curve": [{"model_epochs": int(c.key["model_epochs"]), "mean": c.mean, "std": c.std}
                      for c in report.cells],
        }
