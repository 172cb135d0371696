#!/usr/bin/env python3
"""
Command-line entry point for the pixel offline-RL bench.

    python bench.py gen-data --task pointmass --dist expert --n 100000 --seed 0
    python bench.py stats runs/datasets/pointmass/nominal/*.pobd
    python bench.py train --algo drqbc --alpha 2.5 --preset desk --generate
    python bench.py eval --algo drqbc --checkpoint runs/train/.../agent.ckpt
    python bench.py protocol standard --env pointmass --seeds 3 --preset desk --generate
    python bench.py inspect --checkpoint .../agent.ckpt --penalty-stats --n 1024

Every RunConfig key is also a flag (`--n-transitions`, `--penalty-weight`, ...).
Exit codes: 0 success, 2 usage, 3 calibration, 4 numeric abort,
5 missing input, 6 checkpoint mismatch.
"""
import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import ALIASES, PRESETS, SCHEMA, ConfigError, build_run_config, describe_schema
from config_loader import ConfigLoader
from logging_config import get_logger, log_to_file, setup_logging

logger = get_logger('cli')

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CALIBRATION = 3
EXIT_NUMERIC = 4
EXIT_MISSING = 5
EXIT_CHECKPOINT = 6

CHECKPOINT_NAME = "agent.ckpt"


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _add_schema_flags(parser: argparse.ArgumentParser, skip: tuple = ()) -> None:
    group = parser.add_argument_group("configuration keys (defaults from config.yml, see --help-keys)")
    for name, f in SCHEMA.items():
        flags = [f"--{name.replace('_', '-')}"]
        flags += [f"--{alias.replace('_', '-')}" for alias, target in ALIASES.items()
                  if target == name and alias not in skip]
        default = f.default
        if isinstance(default, bool):
            group.add_argument(*flags, dest=f"key_{name}", nargs="?", const="true", default=None,
                               metavar="BOOL", help=f.metadata.get("help"))
        else:
            group.add_argument(*flags, dest=f"key_{name}", default=None, help=f.metadata.get("help"))


def _common(parser: argparse.ArgumentParser, skip: tuple = ()) -> None:
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named size preset (desk = CPU scale)")
    parser.add_argument("--config", type=Path, help="YAML key: value file layered over the preset")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("-v", "--verbose", action="store_true", help="shorthand for --log-level DEBUG")
    _add_schema_flags(parser, skip)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench.py",
        description="Offline reinforcement learning from pixels at desk scale.",
        epilog="configuration keys:\n" + "\n".join(describe_schema()),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--help-keys", action="store_true", help="list every configuration key and exit")
    sub = parser.add_subparsers(dest="command")

    gen = sub.add_parser("gen-data", help="generate a behavioral dataset")
    _common(gen)
    gen.add_argument("--out", type=Path, help="dataset file (default: the dataset store path)")
    gen.add_argument("--fraction", type=float, default=1.0,
                     help="share of episodes re-rendered with train distractors when a severity is set")

    stats = sub.add_parser("stats", help="print the return statistics of dataset files")
    _common(stats)
    stats.add_argument("datasets", nargs="+", type=Path)
    stats.add_argument("--csv", type=Path, help="also write the table to this file")

    train = sub.add_parser("train", help="train one agent on one dataset")
    _common(train)
    train.add_argument("--dataset", type=Path, help="dataset file (default: resolved through the store)")
    train.add_argument("--out", type=Path, help="run directory")

    ev = sub.add_parser("eval", help="evaluate a trained checkpoint")
    _common(ev)
    ev.add_argument("--checkpoint", type=Path, required=True)
    ev.add_argument("--out", type=Path, help="write the evaluation summary JSON here")

    proto = sub.add_parser("protocol", help="run an experiment protocol end to end")
    _common(proto)
    proto.add_argument("name", choices=["standard", "distraction", "multitask", "scaling", "model_epochs"])
    proto.add_argument("--algorithms", help="comma-separated agent names")
    proto.add_argument("--distributions", help="comma-separated distributions (standard)")
    proto.add_argument("--fractions", help="comma-separated shift percentages (distraction)")
    proto.add_argument("--multipliers", help="comma-separated size multipliers (scaling)")
    proto.add_argument("--checkpoints", help="comma-separated model epochs (model_epochs)")

    insp = sub.add_parser("inspect", help="reconstruction strips, penalty statistics and env frames")
    _common(insp, skip=("n",))
    insp.add_argument("--checkpoint", type=Path, help="Offline DV2 checkpoint")
    insp.add_argument("--dataset", type=Path, action="append", help="dataset file (repeatable)")
    insp.add_argument("--penalty-stats", action="store_true", help="penalty mean/std per dataset")
    insp.add_argument("--n", dest="states", type=int, default=1024, help="posterior states for --penalty-stats")
    insp.add_argument("--strip", action="store_true", help="ground-truth over reconstruction strip")
    insp.add_argument("--every", type=int, default=5, help="keep every k-th frame in strips")
    insp.add_argument("--episode", type=int, default=0, help="dataset episode for --strip")
    insp.add_argument("--env-frames", action="store_true", help="strip of rendered environment frames")
    insp.add_argument("--frames", type=int, default=50, help="agent steps rendered by --env-frames")
    insp.add_argument("--out", type=Path, help="output directory")
    return parser


def run_config_from_args(args: argparse.Namespace):
    file_values: Dict[str, Any] = {}
    if args.config is not None:
        file_values = ConfigLoader(args.config, required=True).as_dict()
    overrides = {name[len("key_"):]: value for name, value in vars(args).items()
                 if name.startswith("key_") and value is not None}
    return build_run_config(preset=args.preset, file_values=file_values, overrides=overrides)


def _split(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [item.strip() for item in text.split(",") if item.strip()]


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_gen_data(args, cfg) -> int:
    from core.data import (DatasetStore, DistractionMix, DistributionSettings, distraction_mixture,
                           make_distribution, save, stats, stats_table)
    from core.env import EnvConfig

    env_config = EnvConfig.from_run_config(cfg).with_distraction(None)
    settings = DistributionSettings.from_run_config(cfg)
    dataset = make_distribution(env_config, cfg.distribution, cfg.seed, cfg.n_transitions, settings)
    mix = None
    if cfg.distraction_severity:
        mix = DistractionMix(cfg.distraction_severity, args.fraction)
        dataset = distraction_mixture(dataset, mix.fraction, mix.severity, cfg.seed)
    path = args.out or DatasetStore(cfg.output_root, settings).path(env_config, cfg.distribution,
                                                                     cfg.n_transitions, cfg.seed, mix)
    save(dataset, path)
    print(stats_table([(dataset.label, stats(dataset))]), end="")
    print(f"path: {path}")
    print(f"checksum: {dataset.header.checksum}")
    return EXIT_OK


def cmd_stats(args, cfg) -> int:
    from core.data import load, stats, stats_table

    rows = []
    for path in args.datasets:
        if not path.exists():
            raise FileNotFoundError(f"Dataset file not found: {path}")
        dataset = load(path)
        rows.append((dataset.label, stats(dataset)))
    table = stats_table(rows)
    print(table, end="")
    if args.csv is not None:
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        args.csv.write_text(table, encoding="utf-8")
    return EXIT_OK


def _training_dataset(args, cfg):
    from core.data import DatasetStore, DistributionSettings, load
    from core.env import EnvConfig

    path = getattr(args, "dataset", None)
    if path is not None:
        if not path.exists():
            raise FileNotFoundError(f"Dataset file not found: {path}")
        return load(path)
    store = DatasetStore(cfg.output_root, DistributionSettings.from_run_config(cfg))
    env_config = EnvConfig.from_run_config(cfg).with_distraction(None)
    return store.get(env_config, cfg.distribution, cfg.n_transitions, cfg.seed, generate=cfg.generate)


def _agent_env(dataset):
    env_config = dataset.env_config
    return env_config.with_variant("") if dataset.mixes_variants else env_config


def cmd_train(args, cfg) -> int:
    from agents import get_agent
    from core.eval import evaluate
    from core.rendering import render_curves

    dataset = _training_dataset(args, cfg)
    env_config = _agent_env(dataset)
    agent = get_agent(cfg.algorithm, cfg, env_config, cfg.seed)

    def evaluator(trained):
        summary = evaluate(trained, env_config, cfg.eval_episodes, cfg.seed + 1000)
        return summary.mean, summary.std

    run_dir = args.out or (Path(cfg.output_root) / "train" / env_config.task / (env_config.variant or "nominal")
                           / f"{dataset.label}_{agent.name}_s{cfg.seed}")
    with log_to_file(run_dir / "train.log"):
        logger.info(f"training {agent.name} on {dataset.label} ({dataset.transitions} transitions)")
        result = agent.train(dataset, evaluator=evaluator if cfg.curve_every else None)
        checkpoint = agent.save(run_dir / CHECKPOINT_NAME,
                                {"dataset": dataset.header.checksum, "config": cfg.to_dict()})

    _write_rows(run_dir / "losses.csv", result.losses)
    _write_rows(run_dir / "curve.csv", result.curve)
    if result.curve:
        series = {agent.name: [(p["offline_epoch"], p["return"]) for p in result.curve]}
        render_curves(series, env_config.max_return, title=f"{agent.name} / {dataset.label}").save(run_dir / "curve.png")
    summary = {"agent": agent.name, "dataset": dataset.label, "steps": result.steps, "env_steps": result.env_steps,
               "phases": result.phases, "final_return": result.curve[-1]["return"] if result.curve else None}
    (run_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"checkpoint: {checkpoint}")
    if result.curve:
        print(f"final return: {result.curve[-1]['return']:.1f}")
    return EXIT_OK


def _write_rows(path: Path, rows: List[Dict[str, Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    keys: List[str] = []
    for row in rows:
        keys += [k for k in row if k not in keys]
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.write_text(buffer.getvalue(), encoding="utf-8")


def _trained_env(checkpoint: Path, fallback):
    """Env the checkpoint's agent was built for; evaluation may run on another variant or distraction."""
    from core.env import EnvConfig
    from core.nn import CheckpointMismatchError, read_header

    recorded = read_header(checkpoint).get("meta", {}).get("spec", {}).get("env")
    if recorded is None:
        return fallback.with_distraction(None).with_variant("")
    try:
        return EnvConfig.from_dict(recorded)
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointMismatchError(f"{checkpoint} records an unusable env: {e}") from e


def cmd_eval(args, cfg) -> int:
    from agents import get_agent
    from core.env import EnvConfig
    from core.eval import evaluate, normalize_return
    from core.nn import CheckpointMismatchError

    if not args.checkpoint.exists():
        raise FileNotFoundError(f"Checkpoint not found: {args.checkpoint}")
    env_config = EnvConfig.from_run_config(cfg)
    trained_env = _trained_env(args.checkpoint, env_config)
    if trained_env.observation_shape != env_config.observation_shape:
        raise CheckpointMismatchError(f"{args.checkpoint} expects observations {trained_env.observation_shape}, "
                                      f"evaluation renders {env_config.observation_shape}")
    agent = get_agent(cfg.algorithm, cfg, trained_env, cfg.seed)
    agent.load(args.checkpoint)
    summary = evaluate(agent, env_config, cfg.eval_episodes, cfg.seed + 1000)
    normalized = normalize_return(summary.mean, env_config.max_return)
    print(f"return: {summary.mean:.1f} ± {summary.std:.1f} (normalized {normalized:.1f}, "
          f"{cfg.eval_episodes} episodes)")
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        payload = {"mean": summary.mean, "std": summary.std, "normalized": normalized, "returns": summary.returns,
                   "env": env_config.to_dict()}
        args.out.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_protocol(args, cfg) -> int:
    from protocols import get_protocol

    algorithms = _split(args.algorithms)
    kwargs: Dict[str, Any] = {}
    if args.name == "standard":
        kwargs = {"algorithms": algorithms, "distributions": _split(args.distributions)}
    elif args.name == "distraction":
        kwargs = {"algorithm": algorithms[0] if algorithms else None, "fractions": _split(args.fractions),
                  "severities": [cfg.distraction_severity] if cfg.distraction_severity else None}
    elif args.name == "multitask":
        kwargs = {"algorithms": algorithms, "distribution": "random" if cfg.distribution == "random" else "medexp"}
    elif args.name == "scaling":
        kwargs = {"algorithms": algorithms, "multipliers": _split(args.multipliers)}
    elif args.name == "model_epochs":
        kwargs = {"checkpoints": _split(args.checkpoints)}
    protocol = get_protocol(args.name)(cfg, **kwargs)
    report = protocol.run()
    print(report.cells_csv(), end="")
    if report.ranks:
        print("average rank: " + ", ".join(f"{k} {v:.2f}" for k, v in report.ranks.items()))
    print(f"report: {protocol.report_dir}")
    return EXIT_OK


def cmd_inspect(args, cfg) -> int:
    from core.data import load
    from core.env import EnvConfig, VisualEnv
    from core.rendering import render_frame_strip, render_reconstruction_strip
    from core.world_model import penalty_stats, penalty_table, reconstruct_episode

    out = args.out or Path(cfg.output_root) / "inspect"
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if args.env_frames:
        env_config = EnvConfig.from_run_config(cfg)
        env = VisualEnv(env_config)
        env.reset(cfg.seed)
        frames = [env.last_frame]
        for _ in range(min(args.frames, env_config.episode_length)):
            env.step([0.0] * env_config.action_dim)
            frames.append(env.last_frame)
        path = out / "env_frames.png"
        render_frame_strip(frames, every=args.every).save(path)
        written.append(path)

    if args.penalty_stats or args.strip:
        if args.checkpoint is None or not args.checkpoint.exists():
            raise FileNotFoundError(f"Checkpoint not found: {args.checkpoint}")
        datasets = [load(p) for p in (args.dataset or [])]
        if not datasets:
            datasets = [_training_dataset(args, cfg)]
        model = _load_world_model(args.checkpoint, cfg, datasets[0])

        if args.penalty_stats:
            rows = [(d.label, *penalty_stats(model, d, args.states, cfg.seq_len, cfg.seed)) for d in datasets]
            table = penalty_table(rows)
            path = out / "penalty_stats.csv"
            path.write_text(table, encoding="utf-8")
            print(table, end="")
            written.append(path)
        if args.strip:
            episodes = datasets[0].episodes
            if not 0 <= args.episode < len(episodes):
                raise ConfigError(f"--episode must be in [0, {len(episodes) - 1}], got {args.episode}")
            truth, decoded = reconstruct_episode(model, episodes[args.episode], args.every)
            path = out / f"reconstruction_{datasets[0].label}_ep{args.episode}.png"
            render_reconstruction_strip(truth, decoded).save(path)
            written.append(path)

    if not written:
        raise ConfigError("inspect needs --env-frames, --penalty-stats or --strip")
    for path in written:
        print(f"wrote: {path}")
    return EXIT_OK


def _load_world_model(path: Path, cfg, dataset):
    from agents import get_agent

    agent = get_agent("odv2", cfg, _agent_env(dataset), cfg.seed)
    agent.load(path)
    return agent.model


COMMANDS = {
    "gen-data": cmd_gen_data,
    "stats": cmd_stats,
    "train": cmd_train,
    "eval": cmd_eval,
    "protocol": cmd_protocol,
    "inspect": cmd_inspect,
}


# ============================================================================
# ENTRY POINT
# ============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    from agents import NumericAbortError, RegistryError
    from core.data import CalibrationError, DatasetFormatError, MissingDatasetError
    from core.nn import CheckpointMismatchError

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.help_keys:
        print("\n".join(describe_schema()))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    setup_logging("DEBUG" if args.verbose else args.log_level)
    try:
        cfg = run_config_from_args(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, RegistryError, ValueError, KeyError) as e:
        logger.error(f"usage: {e}")
        return EXIT_USAGE
    except CalibrationError as e:
        logger.error(f"calibration failed: {e}")
        return EXIT_CALIBRATION
    except NumericAbortError as e:
        logger.error(f"numeric abort at step {e.step}")
        return EXIT_NUMERIC
    except (MissingDatasetError, FileNotFoundError, DatasetFormatError) as e:
        logger.error(f"missing input: {e}")
        return EXIT_MISSING
    except CheckpointMismatchError as e:
        logger.error(f"checkpoint mismatch: {e}")
        return EXIT_CHECKPOINT


if __name__ == "__main__":
    sys.exit(main())
