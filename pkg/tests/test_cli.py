import json
import struct

import pytest

import bench
from core.nn.checkpoint import MAGIC


def run(config_file, *argv):
    command, rest = argv[0], list(argv[1:])
    return bench.main([command, "--config", str(config_file), "--log-level", "WARNING", *rest])


def test_help_keys(capsys):
    assert bench.main(["--help-keys"]) == bench.EXIT_OK
    assert "ensemble_size = 7" in capsys.readouterr().out


def test_no_command_is_a_usage_error(capsys):
    assert bench.main([]) == bench.EXIT_USAGE


def test_unknown_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        bench.main(["train", "--no-such-flag", "1"])
    assert info.value.code == 2


def test_every_schema_key_is_a_flag():
    args = bench.build_parser().parse_args(["train", "--n-step", "5", "--algo", "cql", "--augment", "--dist", "mixed"])
    cfg = bench.run_config_from_args(args)
    assert cfg.n_step == 5
    assert cfg.algorithm == "cql"
    assert cfg.augment is True
    assert cfg.distribution == "mixed"


def test_unknown_key_in_config_file(tmp_path):
    path = tmp_path / "bad.yml"
    path.write_text("learning_rate: 0.1\n")
    assert bench.main(["stats", "--config", str(path), str(tmp_path / "x.pobd")]) == bench.EXIT_USAGE


def test_invalid_value_is_a_usage_error(tiny_config_file):
    assert run(tiny_config_file, "gen-data", "--render-size", "8") == bench.EXIT_USAGE


def test_missing_dataset(tiny_config_file, tmp_path):
    assert run(tiny_config_file, "stats", str(tmp_path / "absent.pobd")) == bench.EXIT_MISSING
    assert run(tiny_config_file, "train", "--dist", "expert") == bench.EXIT_MISSING


def test_calibration_failure(tiny_config_file):
    code = run(tiny_config_file, "gen-data", "--dist", "medium", "--medium-band-low", "990",
               "--medium-band-high", "1000")
    assert code == bench.EXIT_CALIBRATION
    assert run(tiny_config_file, "gen-data", "--dist", "expert", "--expert-min-return", "1000") == bench.EXIT_CALIBRATION


def test_gen_data_then_stats(tiny_config_file, tmp_path, capsys):
    out = tmp_path / "random.pobd"
    assert run(tiny_config_file, "gen-data", "--dist", "random", "--out", str(out)) == bench.EXIT_OK
    assert out.exists()
    capsys.readouterr()
    table = tmp_path / "stats.csv"
    assert run(tiny_config_file, "stats", str(out), "--csv", str(table)) == bench.EXIT_OK
    printed = capsys.readouterr().out
    assert printed.startswith("Dataset,Timesteps,Mean")
    assert table.read_text() == printed


def test_gen_data_writes_to_the_store(tiny_config_file, tmp_path):
    assert run(tiny_config_file, "gen-data", "--dist", "random", "--severity", "low",
               "--fraction", "0.5") == bench.EXIT_OK
    stored = list((tmp_path / "runs" / "datasets" / "pointmass" / "nominal").glob("*.pobd"))
    assert [p.name for p in stored] == ["random_40_s0_low-050.pobd"]


def test_train_then_eval(tiny_config_file, tmp_path):
    assert run(tiny_config_file, "train", "--algo", "bc", "--dist", "random", "--generate") == bench.EXIT_OK
    run_dir = tmp_path / "runs" / "train" / "pointmass" / "nominal" / "random_bc_s0"
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["env_steps"] == 0
    assert summary["final_return"] is not None
    for name in ("agent.ckpt", "losses.csv", "curve.csv", "curve.png", "train.log"):
        assert (run_dir / name).exists()

    checkpoint = str(run_dir / "agent.ckpt")
    out = tmp_path / "eval.json"
    assert run(tiny_config_file, "eval", "--algo", "bc", "--checkpoint", checkpoint,
               "--out", str(out)) == bench.EXIT_OK
    assert len(json.loads(out.read_text())["returns"]) == 1
    assert run(tiny_config_file, "eval", "--algo", "drqbc", "--checkpoint", checkpoint) == bench.EXIT_CHECKPOINT


def test_eval_of_a_variant_checkpoint(tiny_config_file, tmp_path):
    assert run(tiny_config_file, "train", "--algo", "bc", "--dist", "random", "--variant", "B",
               "--generate") == bench.EXIT_OK
    checkpoint = tmp_path / "runs" / "train" / "pointmass" / "B" / "random_bc_s0" / "agent.ckpt"
    assert checkpoint.exists()
    assert run(tiny_config_file, "eval", "--algo", "bc", "--variant", "B",
               "--checkpoint", str(checkpoint)) == bench.EXIT_OK
    # a trained agent may be evaluated under other conditions than it saw
    assert run(tiny_config_file, "eval", "--algo", "bc", "--variant", "C", "--severity", "low",
               "--checkpoint", str(checkpoint)) == bench.EXIT_OK
    assert run(tiny_config_file, "eval", "--algo", "bc", "--render-size", "48",
               "--checkpoint", str(checkpoint)) == bench.EXIT_CHECKPOINT


def test_eval_of_a_corrupt_checkpoint(tiny_config_file, tmp_path):
    bogus = tmp_path / "agent.ckpt"
    for payload in (b"garbage" * 10, MAGIC + b"\x01", MAGIC + struct.pack("<I", 64) + b'{"spec'):
        bogus.write_bytes(payload)
        assert run(tiny_config_file, "eval", "--algo", "bc", "--checkpoint", str(bogus)) == bench.EXIT_CHECKPOINT
    assert run(tiny_config_file, "eval", "--checkpoint", str(tmp_path / "none.ckpt")) == bench.EXIT_MISSING


def test_inspect_env_frames(tiny_config_file, tmp_path):
    out = tmp_path / "inspect"
    assert run(tiny_config_file, "inspect", "--env-frames", "--frames", "6", "--every", "2",
               "--out", str(out)) == bench.EXIT_OK
    assert (out / "env_frames.png").exists()
    assert run(tiny_config_file, "inspect", "--out", str(out)) == bench.EXIT_USAGE


def test_inspect_world_model(tiny_config_file, tmp_path):
    assert run(tiny_config_file, "train", "--algo", "odv2", "--dist", "random", "--generate",
               "--curve-every", "0") == bench.EXIT_OK
    checkpoint = tmp_path / "runs" / "train" / "pointmass" / "nominal" / "random_odv2_s0" / "agent.ckpt"
    out = tmp_path / "inspect"
    code = run(tiny_config_file, "inspect", "--dist", "random", "--checkpoint", str(checkpoint), "--penalty-stats",
               "--n", "12", "--strip", "--every", "5", "--out", str(out))
    assert code == bench.EXIT_OK
    assert (out / "penalty_stats.csv").read_text().startswith("Dataset Type,Mean,Std.")
    assert (out / "reconstruction_random_ep0.png").exists()


def test_logging_levels_and_run_log(tmp_path):
    import logging

    from logging_config import get_logger, log_to_file, setup_logging

    assert setup_logging("warning").level == logging.WARNING
    with pytest.raises(ValueError):
        setup_logging("chatty")
    setup_logging("INFO")
    with log_to_file(tmp_path / "run" / "train.log") as path:
        get_logger("cli").info("inside the run")
    get_logger("cli").info("after the run")
    text = path.read_text()
    assert "pobench.cli: inside the run" in text
    assert "after the run" not in text
