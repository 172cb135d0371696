"""
Centralized configuration module for the pixel offline-RL bench.

This module loads config.yml at startup and exposes typed module-level
defaults (the Offline DV2, DrQ+BC and CQL hyperparameter tables), plus the
RunConfig schema every command is validated against.

Example:
    from config import MODEL_LR, build_run_config
    cfg = build_run_config(preset="desk", overrides={"algorithm": "cql"})

Layering: defaults <- preset <- config file <- command-line flags.
"""

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

from config_loader import load_config

logger = logging.getLogger('pobench.config')


class ConfigError(ValueError):
    """Unknown configuration key or value that cannot be coerced."""


_cfg = load_config()

# ============================================================================
# ENVIRONMENT SETTINGS
# ============================================================================
TASK: str = _cfg.get_string("task", "pointmass")
VARIANT: str = _cfg.get_string("variant", "")
RENDER_SIZE: int = _cfg.get_int("render_size", 32)
ACTION_REPEAT: int = _cfg.get_int("action_repeat", 2)
FRAME_STACK: int = _cfg.get_int("frame_stack", 3)
EPISODE_LENGTH: int = _cfg.get_int("episode_length", 500)

# ============================================================================
# DATASET SETTINGS
# ============================================================================
DISTRIBUTION: str = _cfg.get_string("distribution", "medium")
N_TRANSITIONS: int = _cfg.get_int("n_transitions", 100000)
MEDIUM_BAND: Tuple[float, float] = (
    _cfg.get_float("medium_band_low", 400.0),
    _cfg.get_float("medium_band_high", 600.0),
)
EXPERT_MIN_RETURN: float = _cfg.get_float("expert_min_return", 850.0)
MEDIUM_NOISE: float = _cfg.get_float("medium_noise", 0.6)
EXPERT_NOISE: float = _cfg.get_float("expert_noise", 0.1)
CALIBRATION_EPISODES: int = _cfg.get_int("calibration_episodes", 6)

# ============================================================================
# WORLD MODEL / OFFLINE DV2 SETTINGS
# ============================================================================
ENSEMBLE_SIZE: int = _cfg.get_int("ensemble_size", 7)
IMAG_HORIZON: int = _cfg.get_int("imag_horizon", 5)
DV2_BATCH: int = _cfg.get_int("dv2_batch", 64)
SEQ_LEN: int = _cfg.get_int("seq_len", 50)
MODEL_LR: float = _cfg.get_float("model_lr", 3e-4)
ACTOR_CRITIC_LR: float = _cfg.get_float("actor_critic_lr", 8e-5)
MODEL_EPOCHS: int = _cfg.get_int("model_epochs", 800)
DV2_AGENT_EPOCHS: int = _cfg.get_int("dv2_agent_epochs", 2400)
DISCOUNT: float = _cfg.get_float("discount", 0.99)
LAMBDA_RETURN: float = _cfg.get_float("lambda_return", 0.95)
PENALTY_DEFAULT: float = 10.0
PENALTY_RANGE: Tuple[float, float] = (0.0, 10.0)
WM_DETER: int = _cfg.get_int("wm_deter", 128)
WM_HIDDEN: int = _cfg.get_int("wm_hidden", 128)
WM_EMBED: int = _cfg.get_int("wm_embed", 128)
WM_GROUPS: int = _cfg.get_int("wm_groups", 8)
WM_CLASSES: int = _cfg.get_int("wm_classes", 8)
WM_CONV_DEPTH: int = _cfg.get_int("wm_conv_depth", 16)
KL_BALANCE: float = _cfg.get_float("kl_balance", 0.8)
KL_FREE: float = _cfg.get_float("kl_free", 1.0)

# ============================================================================
# MODEL-FREE SETTINGS
# ============================================================================
MF_BATCH: int = _cfg.get_int("mf_batch", 256)
MF_LR: float = _cfg.get_float("mf_lr", 1e-4)
MF_AGENT_EPOCHS: int = _cfg.get_int("mf_agent_epochs", 256)
N_STEP: int = _cfg.get_int("n_step", 3)
STDDEV_CLIP: float = _cfg.get_float("stddev_clip", 0.3)
STDDEV_SCHEDULE: str = _cfg.get_string("stddev_schedule", "linear(1.0,0.1,500000)")
BC_ALPHA: float = _cfg.get_float("bc_alpha", 2.5)

# ============================================================================
# CQL SETTINGS
# ============================================================================
# pointmass stands in for walker, arm for cheetah
CQL_ALPHA_TABLE: Dict[str, Dict[str, float]] = {
    "pointmass": {"random": 0.5, "mixed": 0.5, "medium": 2.0, "medexp": 2.0, "expert": 5.0},
    "arm": {"random": 0.5, "mixed": 0.5, "medium": 10.0, "medexp": 1.0, "expert": 20.0},
}
CQL_ALPHA_SWEEP: List[float] = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0]

# ============================================================================
# EVALUATION SETTINGS
# ============================================================================
EVAL_EPISODES: int = _cfg.get_int("eval_episodes", 10)
CURVE_EVERY: int = _cfg.get_int("curve_every", 25)
SEEDS: int = _cfg.get_int("seeds", 6)
OUTPUT_ROOT: str = os.getenv("POBENCH_OUTPUT_ROOT", _cfg.get_string("output_root", "./runs"))
WORKERS: int = int(os.getenv("POBENCH_WORKERS", _cfg.get_int("workers", 1)))


def _key(default: Any, help_text: str, source: str = "", aliases: Tuple[str, ...] = ()) -> Any:
    meta = {"help": help_text, "source": source, "aliases": aliases}
    if isinstance(default, list):
        return field(default_factory=lambda: list(default), metadata=meta)
    return field(default=default, metadata=meta)


@dataclass
class RunConfig:
    """Validated key-value configuration for one command invocation."""

    # environment
    task: str = _key(TASK, "task id: pointmass | arm", aliases=("env",))
    variant: str = _key(VARIANT, "dynamics variant A..H (empty = nominal scale 1.0)")
    render_size: int = _key(RENDER_SIZE, "square render size in pixels (16..84)")
    action_repeat: int = _key(ACTION_REPEAT, "simulator steps per agent step", "benchmark")
    frame_stack: int = _key(FRAME_STACK, "frames stacked for model-free agents")
    episode_length: int = _key(EPISODE_LENGTH, "agent steps per episode")
    distraction_severity: str = _key("", "distraction severity: low | moderate | high (empty = none)",
                                     aliases=("severity",))
    distractor_id: int = _key(0, "distractor id (0-9 train, 10-19 test)")

    # data
    distribution: str = _key(DISTRIBUTION, "random | mixed | medium | medexp | expert | randexp",
                             aliases=("dist",))
    n_transitions: int = _key(N_TRANSITIONS, "transitions per generated dataset", "benchmark: 100,000",
                              aliases=("n",))
    medium_band_low: float = _key(MEDIUM_BAND[0], "medium calibration band lower bound")
    medium_band_high: float = _key(MEDIUM_BAND[1], "medium calibration band upper bound")
    expert_min_return: float = _key(EXPERT_MIN_RETURN, "minimum mean return for expert data")
    medium_noise: float = _key(MEDIUM_NOISE, "action noise stddev of the medium policy")
    expert_noise: float = _key(EXPERT_NOISE, "action noise stddev of the expert policy")
    calibration_episodes: int = _key(CALIBRATION_EPISODES, "episodes per gain evaluation during calibration")

    # algorithm selection
    algorithm: str = _key("drqbc", "odv2 | drqbc | cql | bc", aliases=("algo",))
    seed: int = _key(0, "random seed")
    seeds: int = _key(SEEDS, "seeds per protocol cell", "benchmark: 6")
    workers: int = _key(WORKERS, "parallel protocol workers")
    output_root: str = _key(OUTPUT_ROOT, "output root directory (env POBENCH_OUTPUT_ROOT)")

    # world model / Offline DV2
    ensemble_size: int = _key(ENSEMBLE_SIZE, "dynamics ensemble size K", "benchmark: 7")
    imag_horizon: int = _key(IMAG_HORIZON, "imagination horizon H", "benchmark: 5")
    dv2_batch: int = _key(DV2_BATCH, "Offline DV2 sequence batch size", "benchmark: 64")
    seq_len: int = _key(SEQ_LEN, "sequence length L", "benchmark: 50")
    model_lr: float = _key(MODEL_LR, "world model learning rate", "benchmark: 3e-4")
    actor_critic_lr: float = _key(ACTOR_CRITIC_LR, "latent actor-critic learning rate", "benchmark: 8e-5")
    model_epochs: int = _key(MODEL_EPOCHS, "world model training epochs", "benchmark: 800")
    dv2_agent_epochs: int = _key(DV2_AGENT_EPOCHS, "latent actor-critic training epochs", "benchmark: 2400")
    discount: float = _key(DISCOUNT, "discount factor", "benchmark: 0.99")
    lambda_return: float = _key(LAMBDA_RETURN, "TD(lambda) mixing for latent critic targets")
    penalty_weight: Optional[float] = _key(None, "uncertainty weight lambda (empty = per-dataset default)",
                                           "benchmark: [3, 10]")
    wm_deter: int = _key(WM_DETER, "recurrent state width D_h")
    wm_hidden: int = _key(WM_HIDDEN, "hidden width of world model heads")
    wm_embed: int = _key(WM_EMBED, "observation embedding width")
    wm_groups: int = _key(WM_GROUPS, "categorical groups G")
    wm_classes: int = _key(WM_CLASSES, "classes per group C")
    wm_conv_depth: int = _key(WM_CONV_DEPTH, "channels of the first world model conv layer")
    kl_balance: float = _key(KL_BALANCE, "KL balancing weight on the prior term")
    kl_free: float = _key(KL_FREE, "free nats floor on the group-summed KL")
    imag_starts: int = _key(256, "max imagination start states per update")
    actor_entropy: float = _key(1e-4, "latent actor entropy bonus")
    slow_critic_every: int = _key(100, "steps between latent target critic copies")
    grad_clip: float = _key(100.0, "global gradient norm clip for Offline DV2 (0 = off)")

    # model-free
    mf_batch: int = _key(MF_BATCH, "model-free batch size", "benchmark: 256")
    mf_lr: float = _key(MF_LR, "model-free learning rate", "benchmark: 1e-4")
    mf_agent_epochs: int = _key(MF_AGENT_EPOCHS, "model-free training epochs", "benchmark: 256")
    n_step: int = _key(N_STEP, "n-step return length", "benchmark: 3")
    stddev_clip: float = _key(STDDEV_CLIP, "target smoothing noise clip", "benchmark: 0.3")
    stddev_schedule: str = _key(STDDEV_SCHEDULE, "target smoothing stddev schedule",
                                "benchmark: linear(1.0,0.1,500000)")
    bc_alpha: float = _key(BC_ALPHA, "BC trade-off alpha", "benchmark: 2.5", aliases=("alpha",))
    bc_lambda_max: float = _key(1000.0, "adaptive Q weight used when mean|Q| is 0")
    critic_tau: float = _key(0.01, "EMA rate of target critics")
    feature_dim: int = _key(50, "trunk feature width")
    mf_hidden: int = _key(256, "actor/critic hidden width")
    conv_channels: int = _key(32, "model-free encoder channels")
    augment: bool = _key(True, "random shift augmentation of frame stacks")
    augment_pad: int = _key(4, "shift augmentation padding in pixels")

    # CQL
    cql_alpha: Optional[float] = _key(None, "CQL trade-off factor (empty = per-dataset default)", "CQL_ALPHA_TABLE")
    cql_uniform_samples: int = _key(10, "uniform action samples in the logsumexp")
    cql_policy_samples: int = _key(10, "current-policy action samples in the logsumexp")

    # evaluation
    eval_episodes: int = _key(EVAL_EPISODES, "evaluation episodes per checkpoint")
    curve_every: int = _key(CURVE_EVERY, "offline epochs between curve checkpoints")
    final_window: float = _key(0.1, "fraction of last checkpoints averaged for final performance")
    log_every: int = _key(100, "gradient steps between progress log lines")
    generate: bool = _key(False, "generate missing protocol datasets instead of failing")

    def replace(self, **changes: Any) -> "RunConfig":
        return build_run_config(base=self, overrides=changes)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


# ============================================================================
# SCHEMA AND PRESETS
# ============================================================================

SCHEMA: Dict[str, dataclasses.Field] = {f.name: f for f in dataclasses.fields(RunConfig)}
ALIASES: Dict[str, str] = {
    alias: f.name for f in dataclasses.fields(RunConfig) for alias in f.metadata.get("aliases", ())
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "full": {},
    "desk": {
        "n_transitions": 10000,
        "render_size": 32,
        "seeds": 3,
        "wm_deter": 64,
        "wm_hidden": 64,
        "wm_embed": 64,
        "wm_conv_depth": 8,
        "dv2_batch": 16,
        "seq_len": 32,
        "model_epochs": 30,
        "dv2_agent_epochs": 60,
        "imag_starts": 128,
        "mf_batch": 64,
        "mf_hidden": 64,
        "feature_dim": 32,
        "conv_channels": 16,
        "mf_agent_epochs": 30,
        "stddev_schedule": "linear(1.0,0.1,5000)",
        "eval_episodes": 5,
        "curve_every": 100,
        "calibration_episodes": 4,
    },
}


def _coerce(name: str, value: Any) -> Any:
    f = SCHEMA[name]
    default = f.default if f.default is not dataclasses.MISSING else None
    optional = default is None
    if optional and (value is None or (isinstance(value, str) and value.strip() == "")):
        return None
    kind = type(default) if default is not None else float
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("true", "yes", "1", "on"):
                return True
            if text in ("false", "no", "0", "off"):
                return False
            raise ValueError(value)
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if value is None:
            return ""
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Invalid value for '{name}': {value!r} (expected {kind.__name__})")


def canonical_key(key: str) -> str:
    """Map a flag or file key (dashes, aliases) onto its schema name."""
    name = key.strip().lstrip("-").replace("-", "_")
    name = ALIASES.get(name, name)
    if name not in SCHEMA:
        raise ConfigError(f"Unknown configuration key '{key}'")
    return name


def build_run_config(
    preset: Optional[str] = None,
    file_values: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    base: Optional[RunConfig] = None,
) -> RunConfig:
    """
    Layer preset, file values and overrides on top of the defaults.

    Raises:
        ConfigError: unknown key, unknown preset or invalid value
    """
    values = base.to_dict() if base is not None else RunConfig().to_dict()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"Unknown preset '{preset}'. Available presets: {sorted(PRESETS)}")
        values.update(PRESETS[preset])
    for layer in (file_values or {}, overrides or {}):
        for key, value in layer.items():
            name = canonical_key(key)
            values[name] = _coerce(name, value)

    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.task not in ("pointmass", "arm"):
        raise ConfigError(f"Unknown task '{cfg.task}'")
    if not 16 <= cfg.render_size <= 84:
        raise ConfigError(f"render_size must be in [16, 84], got {cfg.render_size}")
    if cfg.action_repeat < 1 or cfg.frame_stack < 1 or cfg.episode_length < 1:
        raise ConfigError("action_repeat, frame_stack and episode_length must be >= 1")
    if cfg.distraction_severity not in ("", "low", "moderate", "high"):
        raise ConfigError(f"Unknown distraction severity '{cfg.distraction_severity}'")
    if cfg.ensemble_size < 2:
        raise ConfigError("ensemble_size must be >= 2")
    if cfg.bc_alpha <= 0:
        raise ConfigError("bc_alpha must be > 0")
    if cfg.cql_uniform_samples + cfg.cql_policy_samples < 2:
        raise ConfigError("CQL needs at least 2 action samples")
    if cfg.penalty_weight is not None and not PENALTY_RANGE[0] <= cfg.penalty_weight <= PENALTY_RANGE[1]:
        raise ConfigError(f"penalty_weight must be in {list(PENALTY_RANGE)}, got {cfg.penalty_weight}")
    for name in ("n_transitions", "seeds", "dv2_batch", "seq_len", "mf_batch", "model_epochs",
                 "dv2_agent_epochs", "mf_agent_epochs", "n_step", "imag_horizon", "eval_episodes"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be positive, got {getattr(cfg, name)}")


def resolve_penalty_weight(task: str, distribution: str, override: Optional[float] = None) -> float:
    """Offline DV2 uncertainty weight: 10 by default, 3 on random data, 8 on pointmass mixed."""
    if override is not None:
        return float(override)
    if distribution == "random":
        return 3.0
    if task == "pointmass" and distribution == "mixed":
        return 8.0
    return PENALTY_DEFAULT


def resolve_cql_alpha(task: str, distribution: str, override: Optional[float] = None) -> float:
    """CQL trade-off factor per (task, distribution)."""
    if override is not None:
        return float(override)
    table = CQL_ALPHA_TABLE.get(task, CQL_ALPHA_TABLE["pointmass"])
    if distribution == "randexp":
        distribution = "medexp"
    return table.get(distribution, 1.0)


def describe_schema() -> List[str]:
    """One line per schema key with its default and source, for --help."""
    lines = []
    defaults = RunConfig()
    for name, f in SCHEMA.items():
        source = f" [{f.metadata['source']}]" if f.metadata.get("source") else ""
        lines.append(f"  {name} = {getattr(defaults, name)!r}{source}: {f.metadata.get('help', '')}")
    return lines


logger.debug(f"Defaults loaded from {_cfg.config_path}: task={TASK}, n_transitions={N_TRANSITIONS}")
