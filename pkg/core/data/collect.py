"""
Dataset collection and the behavioral distributions.

Every episode gets its own seed from a SeedSequence spawned off the run seed,
so an episode can be replayed (and re-rendered) in isolation.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from core.env import Distraction, EnvConfig, Gains, HeldOutDistractorError, TRAIN_IDS, VisualEnv, quantize

from .dataset import LABELS, Dataset, EpisodeRecord, concat, stats
from .errors import CalibrationError, DataError
from .policies import AnnealedPolicy, BehavioralPolicy

logger = logging.getLogger('pobench.data.collect')

PolicyLike = Union[BehavioralPolicy, AnnealedPolicy]

GAIN_SEARCH_RANGE = (1e-3, 1.0)
GAIN_SEARCH_STEPS = 16


@dataclass(frozen=True)
class DistributionSettings:
    medium_band: Tuple[float, float] = (400.0, 600.0)
    expert_min_return: float = 850.0
    medium_noise: float = 0.6
    expert_noise: float = 0.1
    calibration_episodes: int = 6

    @classmethod
    def from_run_config(cls, cfg) -> "DistributionSettings":
        return cls(medium_band=(cfg.medium_band_low, cfg.medium_band_high),
                   expert_min_return=cfg.expert_min_return, medium_noise=cfg.medium_noise,
                   expert_noise=cfg.expert_noise, calibration_episodes=cfg.calibration_episodes)


def episode_seeds(seed: int, count: int) -> List[Tuple[int, np.random.Generator]]:
    """(env reset seed, policy generator) per episode."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [(int(child.generate_state(1)[0]), np.random.default_rng(child)) for child in children]


def rollout(env: VisualEnv, policy: BehavioralPolicy, env_seed: int, rng: np.random.Generator
            ) -> Tuple[List[np.ndarray], np.ndarray, np.ndarray]:
    """Run one episode; frames are empty when the env does not render."""
    env.reset(env_seed)
    frames = [quantize(env.last_frame)] if env.render_enabled else []
    actions, rewards = [], []
    done = False
    while not done:
        action = policy.act(env.task, env.state, env.scale, rng)
        result = env.step(action)
        actions.append(action)
        rewards.append(result.reward)
        done = result.done
        if env.render_enabled:
            frames.append(quantize(env.last_frame))
    return frames, np.asarray(actions), np.asarray(rewards)


def collect(env_config: EnvConfig, policy: PolicyLike, n_transitions: int, seed: int,
            label: str = "custom") -> Dataset:
    """
    Roll n_transitions / episode_length episodes of `policy`.

    Raises:
        DataError: n_transitions is 0 or not a multiple of the episode length
        HeldOutDistractorError: the config renders a test distractor
    """
    length = env_config.episode_length
    if n_transitions <= 0:
        raise DataError("n_transitions must be positive")
    if n_transitions % length:
        raise DataError(f"n_transitions {n_transitions} is not a multiple of the episode length {length}")
    if env_config.distraction is not None and env_config.distraction.is_test:
        raise HeldOutDistractorError(
            f"distractor id {env_config.distraction.distractor_id} is held out for evaluation")

    count = n_transitions // length
    env = VisualEnv(env_config)
    config_hash = env_config.config_hash()
    episodes: List[EpisodeRecord] = []
    for index, (env_seed, rng) in enumerate(episode_seeds(seed, count)):
        frames, actions, rewards = rollout(env, policy.for_episode(index, count), env_seed, rng)
        episodes.append(EpisodeRecord(
            frames=np.stack(frames), actions=actions, rewards=rewards, config_hash=config_hash,
            env_seed=env_seed, variant=env_config.variant,
            distraction=env_config.distraction.to_dict() if env_config.distraction else None,
        ))
        if (index + 1) % 20 == 0 or index + 1 == count:
            logger.debug(f"{label}: {index + 1}/{count} episodes")
    return Dataset.build(label, env_config, [policy.describe()], episodes)


def mean_return(env_config: EnvConfig, policy: PolicyLike, episodes: int, seed: int) -> float:
    """Render-free mean episode return."""
    env = VisualEnv(env_config.with_distraction(None), render_frames=False)
    returns = []
    for index, (env_seed, rng) in enumerate(episode_seeds(seed, episodes)):
        _, _, rewards = rollout(env, policy.for_episode(index, episodes), env_seed, rng)
        returns.append(float(rewards.sum()))
    return float(np.mean(returns))


def _band_for(env_config: EnvConfig, band: Tuple[float, float]) -> Tuple[float, float]:
    # bands are stated on the 1000-point scale
    ratio = env_config.max_return / 1000.0
    return band[0] * ratio, band[1] * ratio


def calibrate_medium(env_config: EnvConfig, settings: DistributionSettings, seed: int) -> Tuple[Gains, float]:
    """
    Log-space bisection on the PD gain multiplier until the mean return hits the band centre.

    Raises:
        CalibrationError: best multiplier still outside the band
    """
    task = env_config.task_impl
    low, high = _band_for(env_config, settings.medium_band)
    centre = 0.5 * (low + high)
    tolerance = 0.25 * (high - low)
    lo, hi = (math.log(v) for v in GAIN_SEARCH_RANGE)
    calibration_seed = int(np.random.SeedSequence([seed, 7919]).generate_state(1)[0])

    best: Optional[Tuple[float, float]] = None
    for step in range(GAIN_SEARCH_STEPS):
        mid = 0.5 * (lo + hi)
        gains = task.expert_gains.scaled(math.exp(mid))
        achieved = mean_return(env_config, BehavioralPolicy.pd(gains, settings.medium_noise),
                               settings.calibration_episodes, calibration_seed)
        logger.debug(f"calibration step {step}: gain x{math.exp(mid):.4f} -> {achieved:.1f}")
        if best is None or abs(achieved - centre) < abs(best[1] - centre):
            best = (math.exp(mid), achieved)
        if abs(achieved - centre) <= tolerance:
            break
        if achieved < centre:
            lo = mid
        else:
            hi = mid

    factor, achieved = best
    if not low <= achieved <= high:
        raise CalibrationError(f"medium policy for '{env_config.task}' missed the band [{low}, {high}]", achieved)
    logger.info(f"Calibrated medium gains for {env_config.task}: x{factor:.4f} -> mean return {achieved:.1f}")
    return task.expert_gains.scaled(factor), achieved


def make_distribution(env_config: EnvConfig, label: str, seed: int, n_transitions: int,
                      settings: Optional[DistributionSettings] = None) -> Dataset:
    """
    Generate one of the behavioral distributions.

    random: uniform actions; medium: detuned noisy PD calibrated into the band;
    expert: tuned PD with low noise; mixed: uniform -> medium annealed over the
    run; medexp / randexp: concatenations with the expert set.
    """
    settings = settings or DistributionSettings()
    if label not in LABELS:
        raise DataError(f"Unknown distribution '{label}'. Available: {list(LABELS)}")
    task = env_config.task_impl
    logger.info(f"Generating {label} for {env_config.task} (variant {env_config.variant or 'nominal'}, "
                f"{n_transitions} transitions, seed {seed})")

    if label == "random":
        return collect(env_config, BehavioralPolicy.random(), n_transitions, seed, label)

    if label == "expert":
        dataset = collect(env_config, BehavioralPolicy.pd(task.expert_gains, settings.expert_noise),
                          n_transitions, seed, label)
        minimum = settings.expert_min_return * env_config.max_return / 1000.0
        achieved = stats(dataset).mean
        if achieved < minimum:
            raise CalibrationError(f"expert dataset for '{env_config.task}' fell below {minimum:.1f}", achieved)
        return dataset

    if label in ("medium", "mixed"):
        gains, _ = calibrate_medium(env_config, settings, seed)
        medium = BehavioralPolicy.pd(gains, settings.medium_noise)
        if label == "mixed":
            return collect(env_config, AnnealedPolicy(medium), n_transitions, seed, label)
        dataset = collect(env_config, medium, n_transitions, seed, label)
        low, high = _band_for(env_config, settings.medium_band)
        achieved = stats(dataset).mean
        if not low <= achieved <= high:
            raise CalibrationError(f"medium dataset for '{env_config.task}' missed the band [{low}, {high}]",
                                   achieved)
        return dataset

    first = "medium" if label == "medexp" else "random"
    return concat(make_distribution(env_config, first, seed, n_transitions, settings),
                  make_distribution(env_config, "expert", seed, n_transitions, settings), label=label)


def rerender(episode: EpisodeRecord, env_config: EnvConfig) -> EpisodeRecord:
    """Replay an episode's actions from its seed and render under `env_config`."""
    env = VisualEnv(env_config)
    env.reset(episode.env_seed)
    frames = [quantize(env.last_frame)]
    for action in episode.actions:
        env.step(action)
        frames.append(quantize(env.last_frame))
    return replace(
        episode,
        frames=np.stack(frames),
        config_hash=env_config.config_hash(),
        distraction=env_config.distraction.to_dict() if env_config.distraction else None,
    )


def distraction_mixture(dataset: Dataset, fraction: float, severity: str, seed: int,
                        train_ids: Sequence[int] = TRAIN_IDS) -> Dataset:
    """
    Re-render round(fraction * episodes) episodes with training distractors.

    Actions, rewards and proprio trajectories are unchanged; chosen episodes
    cycle through `train_ids`.
    """
    if not 0.0 <= fraction <= 1.0:
        raise DataError(f"fraction must be in [0, 1], got {fraction}")
    base = dataset.env_config
    count = len(dataset.episodes)
    chosen = np.random.default_rng(seed).permutation(count)[:int(round(fraction * count))]
    episodes = list(dataset.episodes)
    for slot, index in enumerate(sorted(int(i) for i in chosen)):
        distractor = Distraction(severity, int(train_ids[slot % len(train_ids)]))
        if distractor.is_test:
            raise HeldOutDistractorError(f"distractor id {distractor.distractor_id} is held out for evaluation")
        episode = episodes[index]
        config = base.with_variant(episode.variant).with_distraction(distractor)
        episodes[index] = rerender(episode, config)
    mixed = Dataset.build(dataset.label, base, dataset.header.policy, episodes,
                          allow_variants=dataset.mixes_variants)
    return mixed
