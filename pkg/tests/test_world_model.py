import numpy as np
import pytest

from core.data import sample_sequences
from core.nn import CheckpointMismatchError, Dense, ShapeError, Tensor
from core.world_model import (RSSMConfig, RSSMEnsemble, SequenceTooShortError, WorldModelError, categorical_kl,
                              disagreement_penalty, ensemble_disagreement, fit, imagine, kl_balance, load_model,
                              penalized_reward, penalty_stats, penalty_table, posterior_states, reconstruct_episode,
                              save_model, tie_prior_heads)

CONFIG = RSSMConfig(image_size=16, action_dim=2, deter=8, hidden=8, embed=8, groups=2, classes=3,
                    conv_depth=2, ensemble_size=3)


@pytest.fixture
def model():
    return RSSMEnsemble(CONFIG, seed=0)


# ---------------------------------------------------------------------------
# ensemble disagreement
# ---------------------------------------------------------------------------

def test_disagreement_of_identical_heads_is_zero():
    probs = np.tile(np.array([0.2, 0.3, 0.5]), (4, 6, 1))
    np.testing.assert_allclose(ensemble_disagreement(probs), 0.0, atol=1e-15)


def test_disagreement_two_opposite_heads():
    probs = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert ensemble_disagreement(probs) == pytest.approx(1.0)


def test_disagreement_is_permutation_invariant():
    rng = np.random.default_rng(0)
    for _ in range(20):
        probs = rng.dirichlet(np.ones(6), size=(5, 3))
        shuffled = probs[rng.permutation(5)]
        np.testing.assert_allclose(ensemble_disagreement(probs), ensemble_disagreement(shuffled), rtol=1e-12)
        assert np.all(ensemble_disagreement(probs) >= 0.0)


def test_tied_heads_give_zero_penalty(model):
    tie_prior_heads(model)
    h = np.random.default_rng(1).standard_normal((7, CONFIG.deter))
    np.testing.assert_allclose(disagreement_penalty(model, h), 0.0, atol=1e-15)
    actions = np.zeros((7, CONFIG.action_dim))
    np.testing.assert_allclose(disagreement_penalty(model, h, actions), 0.0, atol=1e-15)


def test_untied_heads_disagree(model):
    h = np.random.default_rng(2).standard_normal((7, CONFIG.deter))
    assert np.all(disagreement_penalty(model, h) > 0.0)


def test_penalized_reward():
    assert penalized_reward(1.0, 0.25, 2.0) == pytest.approx(0.5)
    np.testing.assert_allclose(penalized_reward(np.ones(3), np.array([0.0, 0.1, 0.2]), 10.0), [1.0, 0.0, -1.0])
    assert penalized_reward(1.0, 5.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        penalized_reward(1.0, 0.1, -1.0)


# ---------------------------------------------------------------------------
# KL terms
# ---------------------------------------------------------------------------

def test_categorical_kl_zero_for_same_distribution():
    logits = Tensor(np.random.default_rng(3).standard_normal((4, 6)))
    np.testing.assert_allclose(categorical_kl(logits, logits, 2, 3).data, 0.0, atol=1e-12)


def test_categorical_kl_is_positive_otherwise():
    rng = np.random.default_rng(4)
    p, q = Tensor(rng.standard_normal((4, 6))), Tensor(rng.standard_normal((4, 6)))
    assert np.all(categorical_kl(p, q, 2, 3).data > 0.0)


def test_free_nats_floor_the_balanced_loss():
    logits = Tensor(np.zeros((2, 6)), requires_grad=True)
    loss, value = kl_balance(logits, logits, 2, 3, balance=0.8, free=1.0)
    assert value == pytest.approx(0.0)
    assert loss.item() == pytest.approx(1.0)
    loss.backward()
    np.testing.assert_allclose(logits.grad, 0.0)


def test_balance_weights_the_prior_side():
    rng = np.random.default_rng(5)
    post = Tensor(rng.standard_normal((3, 6)) * 3.0, requires_grad=True)
    prior = Tensor(rng.standard_normal((3, 6)) * 3.0, requires_grad=True)
    loss, _ = kl_balance(post, prior, 2, 3, balance=1.0, free=0.0)
    loss.backward()
    np.testing.assert_allclose(post.grad, 0.0)
    assert np.any(prior.grad != 0.0)


# ---------------------------------------------------------------------------
# filtering, imagination, training
# ---------------------------------------------------------------------------

def test_observe_shapes_and_metrics(model, random_dataset):
    batch = sample_sequences(random_dataset, 3, 5, seed=0)
    result = model.observe(batch.frames, batch.actions, batch.rewards)
    assert result.posterior.h.shape == (3, 5, CONFIG.deter)
    assert result.posterior.z.shape == (3, 5, CONFIG.stoch)
    assert set(result.metrics) == {"image", "reward", "kl", "kl_value", "total"}
    assert np.isfinite(result.loss.item())


def test_observe_rejects_short_or_misshaped_sequences(model):
    with pytest.raises(SequenceTooShortError):
        model.observe(np.zeros((2, 1, 16, 16, 3)), np.zeros((2, 1, 2)))
    with pytest.raises(ShapeError):
        model.observe(np.zeros((2, 3, 20, 20, 3)), np.zeros((2, 3, 2)))


def test_ensemble_needs_two_heads():
    with pytest.raises(WorldModelError):
        RSSMConfig(ensemble_size=1)


def test_imagination_shapes_and_gradient_path(model):
    actor = Dense(CONFIG.feature_size, CONFIG.action_dim, activation="tanh", rng=np.random.default_rng(6))
    start = model.initial(4)
    trajectory = imagine(model, actor, start, horizon=3, rng=np.random.default_rng(7))
    assert trajectory.features.shape == (4, 4, CONFIG.feature_size)
    assert trajectory.rewards.shape == (3, 4)
    assert trajectory.penalties.shape == (3, 4)
    assert np.all(trajectory.penalties >= 0.0)
    trajectory.rewards.sum().backward()
    assert actor.weight.grad is not None
    assert np.any(actor.weight.grad != 0.0)


def test_imagination_horizon_must_be_positive(model):
    with pytest.raises(WorldModelError):
        imagine(model, lambda f: np.zeros((1, 2)), model.initial(1), horizon=0)


def test_fit_lowers_the_loss(model, random_dataset):
    report = fit(model, random_dataset, steps=40, batch=4, seq_len=5, lr=3e-3, seed=0, log_every=0)
    assert report.steps == 40
    assert report.refused == 0
    first = np.mean([m["total"] for m in report.history[:5]])
    last = np.mean([m["total"] for m in report.history[-5:]])
    assert last < first


def test_model_checkpoint_round_trip(tmp_path, model):
    path = save_model(model, tmp_path / "model.ckpt")
    restored = load_model(path, CONFIG)
    for name, value in model.state_dict().items():
        np.testing.assert_array_equal(restored.state_dict()[name], value)
    other = RSSMConfig(image_size=16, action_dim=2, deter=8, hidden=8, embed=8, groups=2, classes=3,
                       conv_depth=2, ensemble_size=4)
    with pytest.raises(CheckpointMismatchError):
        load_model(path, other)


def test_penalty_statistics(model, random_dataset):
    states = posterior_states(model, random_dataset, 12, seq_len=5, seed=0)
    assert states.h.shape == (12, CONFIG.deter)
    mean, std = penalty_stats(model, random_dataset, n_states=12, seq_len=5, seed=0)
    assert mean > 0.0 and std >= 0.0
    assert penalty_stats(model, random_dataset, n_states=12, seq_len=5, seed=0) == (mean, std)
    table = penalty_table([("random", mean, std)])
    assert table.splitlines()[0] == "Dataset Type,Mean,Std."
    with pytest.raises(WorldModelError):
        posterior_states(model, random_dataset, random_dataset.transitions + 1)


def test_reconstruct_episode(model, random_dataset):
    episode = random_dataset.episodes[0]
    truth, decoded = reconstruct_episode(model, episode, every=5)
    assert truth.shape == decoded.shape == (3, 16, 16, 3)
    assert decoded.min() >= 0.0 and decoded.max() <= 1.0
    with pytest.raises(ValueError):
        reconstruct_episode(model, episode, every=0)


@pytest.mark.slow
def test_smoke_training_reconstructs_frames(tiny_env):
    from core.data import make_distribution
    dataset = make_distribution(tiny_env.with_distraction(None), "random", seed=0, n_transitions=1000)
    model = RSSMEnsemble(RSSMConfig(image_size=16, action_dim=2, deter=32, hidden=32, embed=32, groups=4,
                                    classes=4, conv_depth=8, ensemble_size=3), seed=0)
    report = fit(model, dataset, steps=200, batch=8, seq_len=10, lr=1e-3, seed=0, log_every=0)
    assert report.history[-1]["total"] < 0.5 * report.history[0]["total"]
    truth, decoded = reconstruct_episode(model, dataset.episodes[0], every=1)
    assert np.mean((truth - decoded) ** 2) < 0.02
