"""
Episode records, dataset headers, return statistics and concatenation.
"""
import csv
import hashlib
import io
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.env import EnvConfig

from .errors import ConfigMismatchError, ConsistencyError, EmptyDatasetError

FORMAT_VERSION = 1
LABELS = ("random", "mixed", "medium", "medexp", "expert", "randexp")
STATS_COLUMNS = ("Timesteps", "Mean", "Std. Dev.", "Min.", "P25", "Median", "P75", "Max.")


@dataclass
class EpisodeRecord:
    """
    One episode: T+1 uint8 frames, T actions, T rewards.

    `env_seed` replays the episode: reset(env_seed) followed by `actions`
    reproduces every proprio state, with or without distraction.
    """
    frames: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    config_hash: str
    env_seed: int
    variant: str = ""
    distraction: Optional[Dict[str, Any]] = None

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        if self.frames.dtype != np.uint8:
            raise ConsistencyError(f"frames must be uint8, got {self.frames.dtype}")
        t = len(self.rewards)
        if self.actions.shape[0] != t or self.frames.shape[0] != t + 1:
            raise ConsistencyError(
                f"episode lengths disagree: {self.frames.shape[0]} frames, "
                f"{self.actions.shape[0]} actions, {t} rewards")

    @property
    def length(self) -> int:
        return len(self.rewards)

    @property
    def episode_return(self) -> float:
        return float(np.sum(self.rewards))

    def meta(self) -> Dict[str, Any]:
        return {"length": self.length, "config_hash": self.config_hash, "env_seed": self.env_seed,
                "variant": self.variant, "distraction": self.distraction,
                "return": self.episode_return}

    def content_bytes(self) -> bytes:
        """Serialized chunk: u32 T, u32 d, uint8 frames, <f8 actions, <f8 rewards."""
        t, d = self.actions.shape
        return b"".join([
            np.array([t, d], dtype="<u4").tobytes(),
            np.ascontiguousarray(self.frames).tobytes(),
            np.ascontiguousarray(self.actions, dtype="<f8").tobytes(),
            np.ascontiguousarray(self.rewards, dtype="<f8").tobytes(),
        ])


@dataclass(frozen=True)
class ReturnStats:
    """Per-episode return summary in the statistics-table column order."""
    episodes: int
    timesteps: int
    mean: float
    std: float
    min: float
    p25: float
    median: float
    p75: float
    max: float

    @property
    def count(self) -> int:
        return self.episodes

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReturnStats":
        return cls(**data)

    def row(self) -> Tuple[float, ...]:
        return (self.timesteps, self.mean, self.std, self.min, self.p25, self.median, self.p75, self.max)


def return_stats(returns: Sequence[float], timesteps: int) -> ReturnStats:
    values = np.asarray(returns, dtype=np.float64)
    if values.size == 0:
        raise EmptyDatasetError("stats() needs at least one episode")
    p25, median, p75 = np.percentile(values, [25, 50, 75])
    return ReturnStats(
        episodes=int(values.size),
        timesteps=int(timesteps),
        mean=float(values.mean()),
        std=float(values.std()),
        min=float(values.min()),
        p25=float(p25),
        median=float(median),
        p75=float(p75),
        max=float(values.max()),
    )


@dataclass
class DatasetHeader:
    label: str
    transition_count: int
    episode_count: int
    env_config: Dict[str, Any]
    config_hash: str
    policy: List[Dict[str, Any]]
    stats: Optional[Dict[str, Any]]
    variants: List[str]
    distractor_ids: List[int]
    episodes: List[Dict[str, Any]]
    checksum: str = ""
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetHeader":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


def content_checksum(episodes: Iterable[EpisodeRecord]) -> str:
    digest = hashlib.sha256()
    for episode in episodes:
        digest.update(episode.content_bytes())
    return digest.hexdigest()


@dataclass
class Dataset:
    header: DatasetHeader
    episodes: List[EpisodeRecord] = field(default_factory=list)

    @classmethod
    def build(cls, label: str, env_config: EnvConfig, policy: Sequence[Dict[str, Any]],
              episodes: List[EpisodeRecord], allow_variants: bool = False) -> "Dataset":
        """Assemble a dataset and derive every header field from the episodes."""
        base = env_config.with_distraction(None)
        if allow_variants:
            base = base.with_variant("")
        header = DatasetHeader(
            label=label,
            transition_count=0,
            episode_count=0,
            env_config=base.to_dict(),
            config_hash=base.config_hash(include_distraction=False, include_variant=not allow_variants),
            policy=list(policy),
            stats=None,
            variants=[],
            distractor_ids=[],
            episodes=[],
        )
        dataset = cls(header=header, episodes=list(episodes))
        dataset.refresh_header()
        return dataset

    @property
    def label(self) -> str:
        return self.header.label

    @property
    def transitions(self) -> int:
        return sum(e.length for e in self.episodes)

    @property
    def env_config(self) -> EnvConfig:
        return EnvConfig.from_dict(self.header.env_config)

    @property
    def mixes_variants(self) -> bool:
        return len(self.header.variants) > 1

    def refresh_header(self) -> None:
        h = self.header
        h.transition_count = self.transitions
        h.episode_count = len(self.episodes)
        h.episodes = [e.meta() for e in self.episodes]
        h.stats = stats(self).to_dict() if self.episodes else None
        h.variants = sorted({e.variant for e in self.episodes})
        h.distractor_ids = sorted({e.distraction["distractor_id"] for e in self.episodes if e.distraction})
        h.checksum = content_checksum(self.episodes)
        h.format_version = FORMAT_VERSION

    def verify(self) -> None:
        """Raise ConsistencyError unless the header matches the episodes."""
        h = self.header
        actual = self.transitions
        if h.transition_count != actual:
            raise ConsistencyError(
                f"header transition_count {h.transition_count} != {actual} transitions in episodes")
        if h.episode_count != len(self.episodes):
            raise ConsistencyError(
                f"header episode_count {h.episode_count} != {len(self.episodes)} episodes")
        recomputed = stats(self).to_dict() if self.episodes else None
        if h.stats != recomputed:
            raise ConsistencyError(f"header statistics {h.stats} != recomputed {recomputed}")


def stats(dataset: Dataset) -> ReturnStats:
    """Mean, population std, min, P25, median, P75, max of per-episode returns."""
    if not dataset.episodes:
        raise EmptyDatasetError(f"Dataset '{dataset.label}' has no episodes")
    return return_stats([e.episode_return for e in dataset.episodes], dataset.transitions)


def concat(a: Dataset, b: Dataset, label: Optional[str] = None, allow_variants: bool = False) -> Dataset:
    """
    Episodes of `a` then `b` with a recomputed header.

    Raises:
        ConfigMismatchError: environment configs differ (variants may differ
            only with allow_variants)
    """
    config_a, config_b = a.env_config, b.env_config
    hash_a = config_a.config_hash(include_distraction=False, include_variant=not allow_variants)
    hash_b = config_b.config_hash(include_distraction=False, include_variant=not allow_variants)
    if hash_a != hash_b:
        raise ConfigMismatchError(
            f"Cannot concatenate '{a.label}' ({config_a.to_dict()}) with '{b.label}' ({config_b.to_dict()})")
    if label is None:
        label = _concat_label(a, b)
    policy = list(a.header.policy) + list(b.header.policy)
    mixed = allow_variants and {e.variant for e in a.episodes + b.episodes} != {config_a.variant}
    return Dataset.build(label, config_a, policy, a.episodes + b.episodes, allow_variants=mixed)


def _concat_label(a: Dataset, b: Dataset) -> str:
    if not a.episodes:
        return b.label
    if not b.episodes:
        return a.label
    pair = {a.label, b.label}
    if pair == {"medium", "expert"}:
        return "medexp"
    if pair == {"random", "expert"}:
        return "randexp"
    return a.label


def empty_like(dataset: Dataset, label: Optional[str] = None) -> Dataset:
    return Dataset.build(label or dataset.label, dataset.env_config, [], [])


def stats_table(rows: Sequence[Tuple[str, ReturnStats]]) -> str:
    """CSV in the order Dataset, Timesteps, Mean, Std. Dev., Min., P25, Median, P75, Max."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("Dataset",) + STATS_COLUMNS)
    for name, summary in rows:
        writer.writerow([name, summary.timesteps] + [f"{value:.2f}" for value in summary.row()[1:]])
    return buffer.getvalue()
