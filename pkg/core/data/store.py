"""
On-disk dataset store used by the protocols.

    <root>/datasets/<task>/<variant>/<label>_<n>_s<seed>[_<severity>-<pct>].pobd
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from core.env import EnvConfig

from .collect import DistributionSettings, distraction_mixture, make_distribution
from .dataset import Dataset
from .errors import MissingDatasetError
from .storage import load, save

logger = logging.getLogger('pobench.data.store')


@dataclass(frozen=True)
class DistractionMix:
    severity: str
    fraction: float

    @property
    def tag(self) -> str:
        return f"{self.severity}-{int(round(self.fraction * 100)):03d}"


class DatasetStore:
    def __init__(self, root: Union[str, Path], settings: Optional[DistributionSettings] = None):
        self.root = Path(root)
        self.settings = settings or DistributionSettings()

    def path(self, env_config: EnvConfig, label: str, n_transitions: int, seed: int,
             mix: Optional[DistractionMix] = None) -> Path:
        name = f"{label}_{n_transitions}_s{seed}"
        if mix is not None:
            name += f"_{mix.tag}"
        return self.root / "datasets" / env_config.task / (env_config.variant or "nominal") / f"{name}.pobd"

    def get(self, env_config: EnvConfig, label: str, n_transitions: int, seed: int,
            mix: Optional[DistractionMix] = None, generate: bool = False) -> Dataset:
        """
        Load a cell's dataset, generating and saving it first when allowed.

        Raises:
            MissingDatasetError: file absent and generate is off
        """
        path = self.path(env_config, label, n_transitions, seed, mix)
        if path.exists():
            return load(path)
        if not generate:
            cell = f"{env_config.task}/{env_config.variant or 'nominal'}/{label}"
            raise MissingDatasetError(cell + (f"/{mix.tag}" if mix else ""), path)

        if mix is None:
            dataset = make_distribution(env_config.with_distraction(None), label, seed, n_transitions, self.settings)
        else:
            base = self.get(env_config, label, n_transitions, seed, generate=True)
            dataset = distraction_mixture(base, mix.fraction, mix.severity, seed)
        save(dataset, path)
        logger.info(f"Stored {label} at {path} (checksum {dataset.header.checksum[:12]})")
        return dataset
