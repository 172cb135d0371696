import pytest

from config import (ConfigError, PRESETS, RunConfig, build_run_config, canonical_key, describe_schema,
                    resolve_cql_alpha, resolve_penalty_weight)
from config_loader import ConfigLoader


def test_defaults_follow_the_benchmark_tables():
    cfg = RunConfig()
    assert cfg.ensemble_size == 7
    assert cfg.imag_horizon == 5
    assert cfg.dv2_batch == 64 and cfg.seq_len == 50
    assert cfg.mf_batch == 256 and cfg.n_step == 3
    assert cfg.bc_alpha == 2.5
    assert cfg.stddev_schedule == "linear(1.0,0.1,500000)"


def test_aliases_and_dashes_map_to_schema_keys():
    assert canonical_key("--env") == "task"
    assert canonical_key("dist") == "distribution"
    assert canonical_key("--n") == "n_transitions"
    assert canonical_key("--algo") == "algorithm"
    assert canonical_key("--n-step") == "n_step"
    with pytest.raises(ConfigError):
        canonical_key("--learning-rate")


def test_layers_override_in_order():
    cfg = build_run_config(preset="desk", file_values={"seeds": 4, "task": "arm"}, overrides={"seeds": "2"})
    assert cfg.n_transitions == PRESETS["desk"]["n_transitions"]
    assert cfg.task == "arm"
    assert cfg.seeds == 2


def test_values_are_coerced():
    cfg = build_run_config(overrides={"augment": "off", "penalty_weight": "5", "cql_alpha": ""})
    assert cfg.augment is False
    assert cfg.penalty_weight == 5.0
    assert cfg.cql_alpha is None


@pytest.mark.parametrize("overrides", [
    {"unknown_key": 1},
    {"seeds": "many"},
    {"seeds": 2.5},
    {"task": "walker"},
    {"render_size": 8},
    {"render_size": 128},
    {"ensemble_size": 1},
    {"penalty_weight": 11},
    {"distraction_severity": "extreme"},
    {"cql_uniform_samples": 1, "cql_policy_samples": 0},
    {"n_transitions": 0},
])
def test_invalid_values_are_refused(overrides):
    with pytest.raises(ConfigError):
        build_run_config(overrides=overrides)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        build_run_config(preset="huge")


def test_replace_revalidates():
    cfg = RunConfig()
    assert cfg.replace(seeds=3).seeds == 3
    with pytest.raises(ConfigError):
        cfg.replace(render_size=4)


def test_penalty_weight_defaults():
    assert resolve_penalty_weight("pointmass", "random") == 3.0
    assert resolve_penalty_weight("arm", "random") == 3.0
    assert resolve_penalty_weight("pointmass", "mixed") == 8.0
    assert resolve_penalty_weight("arm", "mixed") == 10.0
    assert resolve_penalty_weight("arm", "expert") == 10.0
    assert resolve_penalty_weight("arm", "expert", 4.0) == 4.0


def test_cql_alpha_table():
    assert resolve_cql_alpha("pointmass", "expert") == 5.0
    assert resolve_cql_alpha("arm", "expert") == 20.0
    assert resolve_cql_alpha("arm", "randexp") == resolve_cql_alpha("arm", "medexp")
    assert resolve_cql_alpha("arm", "medium", 0.5) == 0.5


def test_schema_description_lists_every_key():
    lines = describe_schema()
    assert len(lines) == len(RunConfig.__dataclass_fields__)
    assert any(line.strip().startswith("ensemble_size = 7") for line in lines)


def test_config_loader_reads_flat_yaml(tmp_path):
    path = tmp_path / "bench.yml"
    path.write_text("seeds: 4\ntask: arm\naugment: yes\npresets:\n  desk:\n    n_transitions: 500\n")
    loader = ConfigLoader(path)
    assert loader.get_int("seeds") == 4
    assert loader.get_string("task") == "arm"
    assert loader.get_bool("augment") is True
    assert loader.get_int("presets.desk.n_transitions") == 500
    assert loader.get_float("missing", 1.5) == 1.5


def test_config_loader_missing_file(tmp_path):
    assert ConfigLoader(tmp_path / "absent.yml").as_dict() == {}
    with pytest.raises(FileNotFoundError):
        ConfigLoader(tmp_path / "absent.yml", required=True)


def test_config_loader_rejects_non_mappings(tmp_path):
    path = tmp_path / "list.yml"
    path.write_text("- a\n- b\n")
    with pytest.raises(ValueError):
        ConfigLoader(path)


def test_config_loader_lists_and_sections(tmp_path):
    path = tmp_path / "sweep.yml"
    path.write_text("algorithms: odv2, drqbc\nmultipliers: [0.5, 1, 2]\nprotocol:\n  seeds: 3\n")
    loader = ConfigLoader(path)
    assert loader.get_list("algorithms") == ["odv2", "drqbc"]
    assert loader.get_list("multipliers") == [0.5, 1, 2]
    assert loader.get_list("absent", ["bc"]) == ["bc"]
    assert loader.get_dict("protocol") == {"seeds": 3}
    assert loader.get_dict("algorithms") == {}
