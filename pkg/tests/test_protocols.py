import json

import numpy as np
import pytest

from config import ConfigError, build_run_config
from core.data import MissingDatasetError, distraction_mixture
from core.env import TEST_IDS, TRAIN_IDS, EnvConfig, HeldOutDistractorError
from core.eval import evaluate
from protocols import (PROTOCOLS, DistractionProtocol, ModelEpochProtocol, MultitaskProtocol, ProtocolError,
                       ScalingProtocol, StandardProtocol, episode_multiple, get_protocol, parse_checkpoints,
                       parse_fractions, parse_multipliers)
from protocols.model_epochs import default_checkpoints


@pytest.fixture
def generating_cfg(tiny_cfg):
    return tiny_cfg.replace(generate=True)


# ---------------------------------------------------------------------------
# parsing and registry
# ---------------------------------------------------------------------------

def test_parse_fractions():
    assert parse_fractions([50, 0.25, "100", 0]) == [0.0, 0.25, 0.5, 1.0]
    with pytest.raises(ConfigError):
        parse_fractions([30])


def test_parse_multipliers():
    assert parse_multipliers(["2x", 0.5, "1"]) == [0.5, 1.0, 2.0]
    with pytest.raises(ConfigError):
        parse_multipliers([3])


def test_parse_checkpoints():
    assert parse_checkpoints(["1", "4"]) == [1, 4]
    assert default_checkpoints(800) == [100, 200, 400, 800]
    for bad in ([], [0, 2], [3, 2]):
        with pytest.raises(ConfigError):
            parse_checkpoints(bad)


def test_episode_multiple():
    assert episode_multiple(25, 10) == 30
    assert episode_multiple(3, 10) == 10


def test_registry():
    assert set(PROTOCOLS) == {"standard", "distraction", "multitask", "scaling", "model_epochs"}
    assert get_protocol("scaling") is ScalingProtocol
    with pytest.raises(KeyError):
        get_protocol("ablation")


# ---------------------------------------------------------------------------
# tiny end-to-end runs
# ---------------------------------------------------------------------------

def test_missing_datasets_fail_before_training(tiny_cfg):
    protocol = StandardProtocol(tiny_cfg, algorithms=["bc"], distributions=["random"])
    with pytest.raises(MissingDatasetError):
        protocol.run()
    assert not protocol.report_dir.exists()


def test_standard_protocol_writes_its_report(generating_cfg):
    protocol = StandardProtocol(generating_cfg, algorithms=["bc"], distributions=["random"])
    report = protocol.run()
    assert protocol.report_dir.parts[-3:] == ("reports", "standard", "pointmass")
    for name in ("report.json", "cells.csv", "curves.csv", "returns_table.csv", "curves.png"):
        assert (protocol.report_dir / name).exists()
    assert report.ranks == {"bc": 1.0}
    cell = report.cell(dataset="random", algorithm="bc")
    assert cell.seeds == 1
    assert 0.0 <= cell.mean <= generating_cfg.episode_length * generating_cfg.action_repeat
    assert all(point["offline_epoch"] <= 1000.0 for point in report.curves)
    data = json.loads((protocol.report_dir / "report.json").read_text())
    assert data["meta"]["n_transitions"] == generating_cfg.n_transitions


def test_standard_protocol_is_reproducible(generating_cfg, tmp_path):
    first = StandardProtocol(generating_cfg, algorithms=["bc"], distributions=["random"]).run()
    second = StandardProtocol(generating_cfg, algorithms=["bc"], distributions=["random"],
                              output_root=str(tmp_path / "again")).run()
    assert first.cells_csv() == second.cells_csv()


def test_distraction_protocol(generating_cfg):
    protocol = DistractionProtocol(generating_cfg, algorithm="bc", severities=["low"], fractions=[0, 50],
                                   distribution="random")
    report = protocol.run()
    assert len(report.cells) == 2 * 3
    assert {c.key["eval"] for c in report.cells} == {"Original", "Dis. Train", "Dis. Test"}
    normalized = report.extras["normalized_to_unshifted"]
    assert set(normalized) == {f"low/{p}/{c}" for p in ("0", "50") for c in ("Original", "Dis. Train", "Dis. Test")}
    if normalized["low/0/Original"] is not None:
        assert normalized["low/0/Original"] == pytest.approx(100.0)
    ids = [set(entry["distractor_ids"]) for entry in protocol.purity_log]
    assert ids[0] == set()
    assert ids[1] and ids[1] <= set(TRAIN_IDS)
    assert (protocol.report_dir / "distraction_table.csv").exists()


def test_distraction_purity_check(generating_cfg, random_dataset):
    protocol = DistractionProtocol(generating_cfg, algorithm="bc", severities=["low"], fractions=[50])
    cell = protocol.plan()[0]
    leaked = distraction_mixture(random_dataset, 0.5, "low", seed=0)
    leaked.header.distractor_ids = [TEST_IDS[0]]
    with pytest.raises(HeldOutDistractorError):
        protocol.check_purity(cell, leaked)


def test_unknown_severity(generating_cfg):
    with pytest.raises(ConfigError):
        DistractionProtocol(generating_cfg, severities=["extreme"])


def test_multitask_protocol_pools_training_variants(generating_cfg):
    protocol = MultitaskProtocol(generating_cfg, algorithms=["bc"], distribution="random")
    report = protocol.run()
    assert protocol.purity_log[0]["variants"] == ["B", "C", "F", "G"]
    assert {c.key["eval"] for c in report.cells} == {"Train", "Interp.", "Extrap."}
    assert report.extras["transitions_per_variant"] == generating_cfg.n_transitions // 4


def test_multitask_purity_check(generating_cfg, tiny_env):
    from core.data import make_distribution
    protocol = MultitaskProtocol(generating_cfg, algorithms=["bc"], distribution="random")
    held_out = make_distribution(tiny_env.with_variant("A"), "random", seed=0, n_transitions=20)
    with pytest.raises(ProtocolError):
        protocol.check_purity(protocol.plan()[0], held_out)


def test_scaling_protocol(generating_cfg):
    protocol = ScalingProtocol(generating_cfg, algorithms=["bc"], multipliers=["0.5", "1"], distribution="random")
    report = protocol.run()
    assert report.extras["transitions"] == {"0.5x": 20, "1x": 40}
    assert set(report.extras["percentage_gain"]) == {"bc"}
    assert (protocol.report_dir / "scaling_table.csv").read_text().startswith("Algorithm,0.5x,1x,Percentage Gain")


def test_model_epoch_protocol(generating_cfg):
    protocol = ModelEpochProtocol(generating_cfg, checkpoints=[1, 2], distribution="random")
    report = protocol.run()
    assert [c.key["model_epochs"] for c in report.cells] == ["1", "2"]
    assert [point["model_epochs"] for point in report.extras["curve"]] == [1, 2]


# ---------------------------------------------------------------------------
# desk-scale trends (--runslow)
# ---------------------------------------------------------------------------

class RandomAgent:
    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)

    def reset(self):
        pass

    def act(self, obs):
        return self.rng.uniform(-1.0, 1.0, size=2)


def _desk(tmp_path, **overrides):
    return build_run_config(preset="desk", overrides={"output_root": str(tmp_path), "generate": True,
                                                      "seeds": 3, **overrides})


@pytest.mark.slow
def test_dv2_learns_from_random_data(tmp_path):
    cfg = _desk(tmp_path, distribution="random")
    report = StandardProtocol(cfg, algorithms=["odv2"], distributions=["random"]).run()
    env = EnvConfig.from_run_config(cfg).with_distraction(None)
    baseline = evaluate(RandomAgent(0), env, cfg.eval_episodes, seed=99).mean
    assert report.cell(algorithm="odv2").median >= 3.0 * baseline


@pytest.mark.slow
def test_bc_leads_on_expert_and_rl_leads_on_mixed(tmp_path):
    cfg = _desk(tmp_path)
    report = StandardProtocol(cfg, algorithms=["odv2", "drqbc", "bc"], distributions=["mixed", "expert"]).run()
    expert = {a: report.cell(dataset="expert", algorithm=a).median for a in ("odv2", "drqbc", "bc")}
    assert max(expert, key=expert.get) == "bc"
    bc_mixed = report.cell(dataset="mixed", algorithm="bc").median
    for algorithm in ("odv2", "drqbc"):
        assert report.cell(dataset="mixed", algorithm=algorithm).median >= 1.2 * bc_mixed


@pytest.mark.slow
def test_rl_gains_more_from_data_than_bc(tmp_path):
    cfg = _desk(tmp_path, distribution="mixed")
    report = ScalingProtocol(cfg, algorithms=["odv2", "drqbc", "bc"], multipliers=[0.5, 1, 2]).run()
    gains = {a: v["fraction"] for a, v in report.extras["percentage_gain"].items()}
    assert gains["drqbc"] > gains["bc"]
    assert gains["odv2"] > gains["bc"]


@pytest.mark.slow
def test_drqbc_interpolates_better_than_it_extrapolates(tmp_path):
    report = MultitaskProtocol(_desk(tmp_path), algorithms=["drqbc"]).run()
    assert report.cell(eval="Interp.").median >= report.cell(eval="Extrap.").median


@pytest.mark.slow
def test_shifted_training_helps_on_train_distractors(tmp_path):
    report = DistractionProtocol(_desk(tmp_path), algorithm="drqbc", severities=["moderate"], fractions=[100]).run()
    assert report.cell(fraction="100", eval="Dis. Train").median >= report.cell(fraction="100", eval="Original").median


@pytest.mark.slow
def test_longer_model_training_does_not_hurt(tmp_path):
    cfg = _desk(tmp_path, distribution="medium")
    report = ModelEpochProtocol(cfg, checkpoints=[5, 30]).run()
    assert report.cell(model_epochs="30").median >= report.cell(model_epochs="5").median
