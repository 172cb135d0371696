"""
Evaluation metrics: episode returns, normalization, ranks, percentage gain
and final performance over a curve.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from core.env import EnvConfig, VisualEnv

NORMALIZED_SCALE = 100.0


@dataclass(frozen=True)
class ReturnSummary:
    mean: float
    std: float
    returns: List[float] = field(default_factory=list)


def evaluation_seeds(seed: int, n_episodes: int) -> List[int]:
    """Episode reset seeds for evaluation, disjoint in practice from collection seeds."""
    return [int(s) for s in np.random.SeedSequence([seed, 0xE7A1]).generate_state(n_episodes)]


def evaluate(agent, env_config: EnvConfig, n_episodes: int, seed: int) -> ReturnSummary:
    """Run n_episodes with the agent's deterministic act() and summarize raw returns."""
    return evaluate_configs(agent, [env_config], n_episodes, seed)


def evaluate_configs(agent, env_configs: Sequence[EnvConfig], n_episodes: int, seed: int) -> ReturnSummary:
    """Like evaluate(); episode i runs under env_configs[i % len(env_configs)]."""
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be >= 1, got {n_episodes}")
    envs = [VisualEnv(config) for config in env_configs]
    returns = []
    for index, env_seed in enumerate(evaluation_seeds(seed, n_episodes)):
        env = envs[index % len(envs)]
        obs, _ = env.reset(env_seed)
        agent.reset()
        total, done = 0.0, False
        while not done:
            result = env.step(agent.act(obs))
            obs, done = result.frames, result.done
            total += result.reward
        returns.append(total)
    values = np.asarray(returns)
    return ReturnSummary(mean=float(values.mean()), std=float(values.std()), returns=returns)


def normalize_return(raw: float, max_return: float = 1000.0) -> float:
    """[0, max_return] -> [0, 100]."""
    if not 0.0 <= raw <= max_return:
        raise ValueError(f"return {raw} outside [0, {max_return}]")
    return raw * NORMALIZED_SCALE / max_return


def rank_values(values: Sequence[float]) -> List[float]:
    """Rank 1 = highest; ties share the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: -values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def average_ranks(table: Mapping[str, Mapping[str, float]]) -> Dict[str, float]:
    """
    Mean rank per algorithm over datasets.

    Args:
        table: {dataset: {algorithm: mean return}}
    """
    collected: Dict[str, List[float]] = {}
    for scores in table.values():
        names = sorted(scores)
        for name, rank in zip(names, rank_values([scores[n] for n in names])):
            collected.setdefault(name, []).append(rank)
    return {name: float(np.mean(ranks)) for name, ranks in sorted(collected.items())}


def percentage_gain(by_size: Mapping[float, float]) -> Optional[float]:
    """(mean at largest size - mean at smallest) / mean at smallest; None for one size or a zero base."""
    if len(by_size) < 2:
        return None
    sizes = sorted(by_size)
    small, large = by_size[sizes[0]], by_size[sizes[-1]]
    if small == 0:
        return None
    return (large - small) / small


def final_performance(curve_returns: Sequence[float], window: float = 0.1) -> float:
    """Mean over the last `window` share of evaluation checkpoints (at least one)."""
    if not curve_returns:
        raise ValueError("final_performance needs at least one checkpoint")
    count = max(1, math.ceil(window * len(curve_returns)))
    return float(np.mean(curve_returns[-count:]))
