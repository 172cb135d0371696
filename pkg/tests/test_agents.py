import dataclasses

import numpy as np
import pytest

from agents import (AgentError, AgentRegistry, NumericAbortError, ObservationShapeError, RegistryError, UnknownAgentError,
                    get_agent, get_default_agent_name, list_available_agents)
from agents.augment import random_shift, shift_frames
from agents.cql import CQLAgent, cql_loss, cql_regularizer
from agents.drqbc import bc_lambda, bc_term, parse_schedule
from agents.odv2 import lambda_returns
from config import RunConfig
from core.env import VisualEnv
from core.nn import CheckpointMismatchError, Tensor

ALGORITHMS = ["bc", "drqbc", "cql", "odv2"]


def _agent(name, cfg, env, seed=0):
    return get_agent(name, cfg.replace(algorithm=name), env, seed)


# ---------------------------------------------------------------------------
# loss terms
# ---------------------------------------------------------------------------

def test_bc_lambda_normalizes_the_q_scale():
    cap = RunConfig().bc_lambda_max
    rng = np.random.default_rng(0)
    for _ in range(1000):
        q = rng.standard_normal(16) * 10.0 ** rng.uniform(-6.0, 2.0)
        lam = bc_lambda(q, 2.5, cap)
        assert lam * np.mean(np.abs(q)) == pytest.approx(2.5)
    assert bc_lambda(np.full(4, 1e-3), 2.5, cap) == pytest.approx(2500.0)


def test_bc_lambda_cap_only_covers_an_all_zero_batch():
    cap = RunConfig().bc_lambda_max
    assert bc_lambda(np.zeros(8), 2.5, cap) == cap
    assert bc_lambda(np.full(8, 1e-6), 2.5, cap) * 1e-6 == pytest.approx(2.5)


def test_bc_term():
    actions = np.array([[0.5, -0.5], [0.1, 0.2]])
    assert bc_term(Tensor(actions), actions).item() == 0.0
    assert bc_term(Tensor(np.zeros((2, 2))), actions).item() == pytest.approx((0.5 + 0.05) / 2)


def test_cql_regularizer_is_non_negative_when_data_is_sampled():
    rng = np.random.default_rng(1)
    for _ in range(100):
        samples = rng.standard_normal((6, 5)) * 3.0
        q_data = samples[:, rng.integers(0, 5)]
        assert cql_regularizer(Tensor(samples), Tensor(q_data)).item() >= 0.0


def test_cql_with_zero_alpha_is_plain_td():
    rng = np.random.default_rng(2)
    q = Tensor(rng.standard_normal(8))
    target = rng.standard_normal(8)
    samples = Tensor(rng.standard_normal((8, 4)))
    td = 0.5 * np.mean((q.data - target) ** 2)
    assert cql_loss(q, target, samples, 0.0).item() == pytest.approx(td)
    assert cql_loss(q, target, samples, 1.0).item() > td - 1e-12


def test_parse_schedule():
    schedule = parse_schedule("linear(1.0, 0.1, 100)")
    assert schedule(0) == pytest.approx(1.0)
    assert schedule(50) == pytest.approx(0.55)
    assert schedule(1000) == pytest.approx(0.1)
    assert parse_schedule("0.2")(12345) == 0.2
    with pytest.raises(ValueError):
        parse_schedule("cosine(1, 2)")


def test_random_shift_keeps_shape():
    obs = np.random.default_rng(3).uniform(size=(4, 16, 16, 6))
    shifted = random_shift(obs, 2, np.random.default_rng(4))
    assert shifted.shape == obs.shape
    assert shifted.min() >= obs.min() - 1e-12 and shifted.max() <= obs.max() + 1e-12
    assert random_shift(obs, 0, np.random.default_rng(4)) is obs


def test_shift_frames_interpolates_between_pixels():
    obs = np.random.default_rng(5).uniform(size=(2, 6, 6, 3))
    shifted = shift_frames(obs, [[0.0, 0.5], [-0.5, 0.0]])
    np.testing.assert_allclose(shifted[0, :, :-1], 0.5 * (obs[0, :, :-1] + obs[0, :, 1:]))
    np.testing.assert_allclose(shifted[1, 1:], 0.5 * (obs[1, :-1] + obs[1, 1:]))
    np.testing.assert_allclose(shift_frames(obs, np.zeros((2, 2))), obs)


def test_shift_frames_fills_borders_from_the_edge():
    obs = np.random.default_rng(6).uniform(size=(1, 5, 5, 2))
    right = shift_frames(obs, [[0.0, 1.5]])
    np.testing.assert_allclose(right[0, :, -2:], np.repeat(obs[0, :, -1:], 2, axis=1))
    np.testing.assert_allclose(right[0, :, 2], 0.5 * (obs[0, :, 3] + obs[0, :, 4]))
    down = shift_frames(obs, [[-2.25, 0.0]])
    np.testing.assert_allclose(down[0, :3], np.repeat(obs[0, :1], 3, axis=0))
    np.testing.assert_allclose(down[0, 3], 0.25 * obs[0, 0] + 0.75 * obs[0, 1])


def test_augmentation_leaves_labels_alone(tiny_cfg, tiny_env, random_dataset):
    agent = _agent("bc", tiny_cfg.replace(augment=True, augment_pad=2), tiny_env)
    batch = agent.sample(random_dataset)
    obs, action, reward = batch.obs.copy(), batch.action.copy(), batch.reward.copy()
    shifted = agent.augment(batch.obs)
    assert shifted.shape == obs.shape
    assert not np.array_equal(shifted, obs)
    np.testing.assert_array_equal(batch.obs, obs)
    np.testing.assert_array_equal(batch.action, action)
    np.testing.assert_array_equal(batch.reward, reward)


def test_lambda_returns_hand_case():
    rewards = Tensor(np.array([[1.0], [1.0]]))
    values = Tensor(np.array([[0.0], [0.0], [2.0]]))
    returns = lambda_returns(rewards, values, discount=0.5, lam=0.5)
    np.testing.assert_allclose(returns.data[:, 0], [1.5, 2.0])
    full = lambda_returns(rewards, values, discount=0.5, lam=1.0)
    np.testing.assert_allclose(full.data[:, 0], [2.0, 2.0])


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def test_registry_lists_every_algorithm():
    assert set(list_available_agents()) == set(ALGORITHMS)
    assert get_default_agent_name() == "drqbc"


def test_unknown_algorithm(tiny_cfg, tiny_env):
    with pytest.raises(KeyError):
        get_agent("dqn", tiny_cfg, tiny_env)


def test_unknown_algorithm_is_an_agent_error(tiny_cfg, tiny_env):
    with pytest.raises(UnknownAgentError) as info:
        get_agent("dqn", tiny_cfg, tiny_env)
    assert isinstance(info.value, AgentError)
    assert "dqn" in str(info.value)


@pytest.mark.parametrize("content", [None, "{not json", '{"agents": {"bc": {"module": "agents.bc"}}}',
                                     '{"agents": {"bc": {"module": "agents.no_such_module", "class": "X"}}}',
                                     '{"agents": {"bc": {"module": "agents.bc", "class": "bc_term"}}}'])
def test_broken_registry_raises_registry_error(tmp_path, tiny_cfg, tiny_env, content):
    path = tmp_path / "agents.json"
    if content is not None:
        path.write_text(content)
    with pytest.raises(RegistryError):
        AgentRegistry(path).create_agent("bc", tiny_cfg, tiny_env)


def test_registry_without_agents(tmp_path, tiny_cfg, tiny_env):
    path = tmp_path / "agents.json"
    path.write_text('{"agents": {}}')
    with pytest.raises(RegistryError):
        AgentRegistry(path).create_agent(None, tiny_cfg, tiny_env)


def test_cql_needs_two_samples(tiny_cfg, tiny_env):
    cfg = tiny_cfg.replace(cql_uniform_samples=1, cql_policy_samples=1)
    agent = CQLAgent(cfg, tiny_env)
    assert agent.sampled_actions(Tensor(np.zeros((3, agent.encoder.repr_dim)))).shape == (3, 2, 2)
    # build_run_config refuses this too; dataclasses.replace skips validation
    with pytest.raises(ValueError):
        CQLAgent(dataclasses.replace(cfg, cql_policy_samples=0), tiny_env)


# ---------------------------------------------------------------------------
# training, acting, checkpoints
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ALGORITHMS)
def test_agents_train_offline_and_act(name, tiny_cfg, tiny_env, random_dataset):
    agent = _agent(name, tiny_cfg, tiny_env)
    result = agent.train(random_dataset)
    assert result.steps == sum(p["steps"] for p in result.phases) > 0
    assert result.env_steps == 0
    assert all(np.isfinite(v) for entry in result.losses for k, v in entry.items()
               if k not in ("phase", "step", "offline_epoch"))

    env = VisualEnv(tiny_env)
    obs, _ = env.reset(0)
    agent.reset()
    action = agent.act(obs)
    assert action.shape == (2,)
    assert np.all(np.abs(action) <= 1.0)


@pytest.mark.parametrize("name", ALGORITHMS)
def test_checkpoint_round_trip_reproduces_actions(name, tmp_path, tiny_cfg, tiny_env, random_dataset):
    agent = _agent(name, tiny_cfg, tiny_env, seed=1)
    agent.train(random_dataset)
    path = agent.save(tmp_path / f"{name}.ckpt", {"note": name})

    restored = _agent(name, tiny_cfg, tiny_env, seed=7)
    header = restored.load(path)
    assert header["meta"]["note"] == name

    env = VisualEnv(tiny_env)
    obs, _ = env.reset(3)
    agent.reset()
    restored.reset()
    for _ in range(3):
        a, b = agent.act(obs), restored.act(obs)
        np.testing.assert_allclose(a, b)
        obs = env.step(a).frames


def test_checkpoint_of_another_agent_is_refused(tmp_path, tiny_cfg, tiny_env):
    path = _agent("bc", tiny_cfg, tiny_env).save(tmp_path / "bc.ckpt")
    with pytest.raises(CheckpointMismatchError):
        _agent("drqbc", tiny_cfg, tiny_env).load(path)
    wider = tiny_cfg.replace(mf_hidden=32)
    with pytest.raises(CheckpointMismatchError):
        _agent("bc", wider, tiny_env).load(path)


def test_act_checks_the_observation_shape(tiny_cfg, tiny_env):
    agent = _agent("bc", tiny_cfg, tiny_env)
    with pytest.raises(ObservationShapeError):
        agent.act(np.zeros((16, 16, 3)))


def test_evaluation_inside_training_is_not_counted(tiny_cfg, tiny_env, random_dataset):
    agent = _agent("bc", tiny_cfg, tiny_env)

    def evaluator(a):
        env = VisualEnv(tiny_env)
        obs, _ = env.reset(0)
        for _ in range(3):
            obs = env.step(a.act(obs)).frames
        return 1.0, 0.0

    result = agent.train(random_dataset, evaluator=evaluator, curve_every=500)
    assert result.env_steps == 0
    assert [c["offline_epoch"] for c in result.curve][-1] == pytest.approx(1000.0)
    assert len(result.curve) >= 2


def test_non_finite_loss_aborts_training(tiny_cfg, tiny_env, random_dataset, monkeypatch):
    agent = _agent("drqbc", tiny_cfg, tiny_env)
    monkeypatch.setattr(agent, "train_step", lambda phase, dataset, step: ({"critic_loss": float("nan")}, []))
    with pytest.raises(NumericAbortError) as info:
        agent.train(random_dataset)
    assert info.value.step == 1
    assert "critic_loss" in info.value.diagnostics["non_finite"]


def test_dv2_skips_the_model_phase_with_a_trained_model(tiny_cfg, tiny_env, random_dataset):
    agent = _agent("odv2", tiny_cfg, tiny_env)
    assert [p.name for p in agent.plan(random_dataset)] == ["model", "agent"]
    agent.use_model(agent.model.state_dict())
    assert [p.name for p in agent.plan(random_dataset)] == ["agent"]


def test_dv2_penalty_weight_follows_the_dataset(tiny_cfg, tiny_env):
    assert _agent("odv2", tiny_cfg.replace(distribution="random"), tiny_env).penalty_weight == 3.0
    assert _agent("odv2", tiny_cfg.replace(distribution="mixed"), tiny_env).penalty_weight == 8.0
    assert _agent("odv2", tiny_cfg.replace(distribution="expert"), tiny_env).penalty_weight == 10.0
    assert _agent("odv2", tiny_cfg.replace(penalty_weight=0.0), tiny_env).penalty_weight == 0.0
