"""
Shared fixtures: tiny environment configs, tiny datasets and a RunConfig
small enough for every agent to train a few steps on CPU.
"""
import pytest
import yaml

from config import build_run_config
from core.data import DistributionSettings, make_distribution
from core.env import EnvConfig

TINY_EPISODE = 10
TINY_RENDER = 16

TINY_OVERRIDES = {
    "render_size": TINY_RENDER,
    "episode_length": TINY_EPISODE,
    "action_repeat": 2,
    "frame_stack": 2,
    "n_transitions": 4 * TINY_EPISODE,
    "seeds": 1,
    "eval_episodes": 1,
    "curve_every": 500,
    "log_every": 1000,
    # model-free
    "mf_batch": 8,
    "mf_hidden": 16,
    "feature_dim": 8,
    "conv_channels": 4,
    "mf_agent_epochs": 1,
    "augment_pad": 1,
    "cql_uniform_samples": 2,
    "cql_policy_samples": 2,
    # world model
    "ensemble_size": 2,
    "wm_deter": 16,
    "wm_hidden": 16,
    "wm_embed": 16,
    "wm_groups": 2,
    "wm_classes": 3,
    "wm_conv_depth": 4,
    "dv2_batch": 2,
    "seq_len": 5,
    "model_epochs": 1,
    "dv2_agent_epochs": 1,
    "imag_starts": 8,
    "imag_horizon": 2,
    "calibration_episodes": 2,
    # ten-step episodes cannot reach the desk-scale expert floor
    "expert_min_return": 0.0,
}
TINY_SETTINGS = DistributionSettings(expert_min_return=0.0, calibration_episodes=2)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale trend checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_cfg(tmp_path):
    return build_run_config(overrides={**TINY_OVERRIDES, "output_root": str(tmp_path / "runs")})


@pytest.fixture
def tiny_env():
    return EnvConfig(task="pointmass", render_size=TINY_RENDER, action_repeat=2, frame_stack=2,
                     episode_length=TINY_EPISODE)


@pytest.fixture
def tiny_arm_env():
    return EnvConfig(task="arm", render_size=TINY_RENDER, action_repeat=2, frame_stack=2,
                     episode_length=TINY_EPISODE)


@pytest.fixture
def random_dataset(tiny_env):
    return make_distribution(tiny_env, "random", seed=0, n_transitions=4 * TINY_EPISODE)


@pytest.fixture
def expert_dataset(tiny_env):
    return make_distribution(tiny_env, "expert", seed=1, n_transitions=4 * TINY_EPISODE, settings=TINY_SETTINGS)


@pytest.fixture
def tiny_config_file(tmp_path):
    """The tiny overrides as a YAML file for the command line."""
    path = tmp_path / "tiny.yml"
    path.write_text(yaml.safe_dump({**TINY_OVERRIDES, "output_root": str(tmp_path / "runs")}))
    return path
