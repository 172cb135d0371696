import struct

import numpy as np
import pytest

from core.nn import (Adam, AdamState, BackwardError, CheckpointMismatchError, Conv2d, Dense, GRUCell, LayerNorm,
                     LayerSpec, Network, NetworkSpec, ShapeError, SpecError, Tensor, adam_step, grad_check,
                     grad_check_fn, load_params, no_grad, read_header, save_params, spec_digest,
                     straight_through_onehot)
from core.nn.checkpoint import MAGIC
from core.nn.gradcheck import MAX_CHECK_PARAMETERS
from core.nn.tensor import sample_onehot

TOLERANCE = 1e-4
TRIALS = 100


def _readout_loss(module, inputs, readout):
    def loss():
        return (module(*inputs) * readout).sum()
    return loss


# ---------------------------------------------------------------------------
# gradient checks, randomized trials per layer type
# ---------------------------------------------------------------------------

def test_dense_gradients_match_central_differences():
    rng = np.random.default_rng(0)
    worst = 0.0
    for trial in range(TRIALS):
        layer = Dense(3, 4, activation="tanh", rng=np.random.default_rng(trial))
        x = rng.standard_normal((2, 3))
        readout = rng.standard_normal((2, 4))
        worst = max(worst, grad_check_fn(_readout_loss(layer, (x,), readout), layer.named_parameters()))
    assert worst < TOLERANCE


def test_conv2d_gradients_match_central_differences():
    rng = np.random.default_rng(1)
    worst = 0.0
    for trial in range(TRIALS):
        stride = 1 + trial % 2
        layer = Conv2d(2, 2, 3, stride=stride, padding=trial % 2, activation="tanh",
                       rng=np.random.default_rng(trial))
        x = rng.standard_normal((1, 5, 5, 2))
        out = layer(x)
        readout = rng.standard_normal(out.shape)
        worst = max(worst, grad_check_fn(_readout_loss(layer, (x,), readout), layer.named_parameters()))
    assert worst < TOLERANCE


def test_layernorm_gradients_match_central_differences():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(TRIALS):
        layer = LayerNorm(5)
        layer.gain.data = rng.uniform(0.5, 1.5, size=5)
        layer.bias.data = rng.standard_normal(5)
        x = rng.standard_normal((3, 5))
        readout = rng.standard_normal((3, 5))
        worst = max(worst, grad_check_fn(_readout_loss(layer, (x,), readout), layer.named_parameters()))
    assert worst < TOLERANCE


def test_gru_cell_gradients_match_central_differences():
    rng = np.random.default_rng(3)
    worst = 0.0
    for trial in range(TRIALS):
        cell = GRUCell(3, 4, rng=np.random.default_rng(trial))
        x = rng.standard_normal((2, 3))
        h = rng.standard_normal((2, 4)) * 0.5
        readout = rng.standard_normal((2, 4))
        worst = max(worst, grad_check_fn(_readout_loss(cell, (x, h), readout), cell.named_parameters()))
    assert worst < TOLERANCE


def test_input_gradients_of_tensor_ops():
    rng = np.random.default_rng(4)
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    w = rng.standard_normal((3, 4))

    def loss():
        y = (x.softplus() * w).logsumexp(axis=1) + x.sigmoid().mean(axis=1) + (x * x + 1.0).sqrt().sum(axis=1)
        return (y * np.arange(1.0, 4.0)).sum() + x.log_softmax(axis=0).sum() * 0.1

    assert grad_check_fn(loss, {"x": x}) < TOLERANCE


def test_network_spec_grad_check_conv_stack():
    spec = NetworkSpec((5, 5, 2), layers=(
        LayerSpec("conv", 3, kernel=3, activation="tanh"),
        LayerSpec("flatten"),
        LayerSpec("dense", 4, activation="elu"),
        LayerSpec("layernorm"),
        LayerSpec("dense", 2),
    ))
    net = Network(spec, seed=0)
    x = np.random.default_rng(5).standard_normal((2, 5, 5, 2))
    assert grad_check(net, x) < TOLERANCE


def test_network_spec_grad_check_recurrent():
    spec = NetworkSpec((4, 3), layers=(LayerSpec("gru", 5), LayerSpec("dense", 2, activation="tanh")))
    net = Network(spec, seed=1)
    x = np.random.default_rng(6).standard_normal((2, 4, 3))
    assert grad_check(net, x) < TOLERANCE


def test_grad_check_refuses_large_networks():
    layer = Dense(100, 100)
    with pytest.raises(ValueError):
        grad_check_fn(lambda: layer(np.ones((1, 100))).sum(), layer.named_parameters())
    assert layer.num_parameters() >= MAX_CHECK_PARAMETERS


# ---------------------------------------------------------------------------
# network construction and bookkeeping
# ---------------------------------------------------------------------------

def test_network_rejects_wrong_input_shape():
    net = Network(NetworkSpec((4,), layers=(LayerSpec("dense", 3),)))
    with pytest.raises(ShapeError):
        net.forward(np.zeros((2, 5)))


def test_network_backward_before_forward():
    net = Network(NetworkSpec((4,), layers=(LayerSpec("dense", 3),)))
    with pytest.raises(BackwardError):
        net.backward(np.ones((1, 3)))


def test_network_backward_matches_readout_gradient():
    net = Network(NetworkSpec((4,), layers=(LayerSpec("dense", 3, activation="tanh"),)), seed=2)
    x = np.random.default_rng(7).standard_normal((2, 4))
    upstream = np.random.default_rng(8).standard_normal((2, 3))
    out = net.forward(x)
    grads = net.backward(upstream)
    pre = x @ net.layers[0].weight.data + net.layers[0].bias.data
    expected_w = x.T @ (upstream * (1.0 - np.tanh(pre) ** 2))
    np.testing.assert_allclose(grads["l0.W"], expected_w, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(out.data, np.tanh(pre))


@pytest.mark.parametrize("layers", [
    (),
    (LayerSpec("pool", 3),),
    (LayerSpec("dense", 3, activation="swish"),),
    (LayerSpec("conv", 2, kernel=9),),
])
def test_invalid_network_specs(layers):
    with pytest.raises(SpecError):
        Network(NetworkSpec((6, 6, 1), layers=layers))


def test_no_grad_builds_no_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = (x * 2.0).sum()
    assert not y.requires_grad
    y.backward()
    assert x.grad is None


def test_logsumexp_bounds_the_max():
    rng = np.random.default_rng(9)
    for _ in range(50):
        values = rng.standard_normal((4, 6)) * 10.0
        lse = Tensor(values).logsumexp(axis=1).data
        assert np.all(lse >= values.max(axis=1))
        assert np.all(lse <= values.max(axis=1) + np.log(6) + 1e-12)


# ---------------------------------------------------------------------------
# straight-through categorical sampling
# ---------------------------------------------------------------------------

def test_straight_through_forward_is_one_hot():
    rng = np.random.default_rng(10)
    logits = Tensor(rng.standard_normal((5, 2 * 3)), requires_grad=True)
    sample, probs = straight_through_onehot(logits, 2, 3, rng)
    grouped = sample.data.reshape(5, 2, 3)
    assert set(np.unique(grouped)) <= {0.0, 1.0}
    np.testing.assert_allclose(grouped.sum(axis=-1), 1.0)
    np.testing.assert_allclose(probs.data.reshape(5, 2, 3).sum(axis=-1), 1.0)


def test_straight_through_gradient_is_the_probability_gradient():
    rng = np.random.default_rng(11)
    logits = Tensor(rng.standard_normal((3, 8)), requires_grad=True)
    weights = rng.standard_normal((3, 8))

    sample, _ = straight_through_onehot(logits, 2, 4, np.random.default_rng(0))
    (sample * weights).sum().backward()
    through_sample = logits.grad.copy()

    logits.grad = None
    _, probs = straight_through_onehot(logits, 2, 4, np.random.default_rng(0))
    (probs * weights).sum().backward()
    np.testing.assert_allclose(through_sample, logits.grad, atol=1e-12)


def test_sample_onehot_frequencies_follow_probabilities():
    probs = np.array([0.1, 0.2, 0.7])
    draws = sample_onehot(np.tile(probs, (20000, 1)), np.random.default_rng(12))
    np.testing.assert_allclose(draws.mean(axis=0), probs, atol=0.02)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_minimizes_a_quadratic():
    x = Tensor(np.array([-2.0, 5.0]), requires_grad=True)
    opt = Adam({"x": x}, lr=0.1)
    for _ in range(500):
        opt.zero_grad()
        ((x - 3.0) ** 2).sum().backward()
        report = opt.step()
        assert report.applied
    np.testing.assert_allclose(x.data, [3.0, 3.0], atol=1e-2)


def test_adam_refuses_non_finite_gradients():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    state = AdamState()
    before = x.data.copy()
    report = adam_step({"x": x}, {"x": np.array([np.nan, 1.0])}, lr=0.1, state=state)
    assert not report.applied
    assert report.non_finite == ["x"]
    assert "non-finite" in report.diagnostic
    assert state.t == 0
    np.testing.assert_array_equal(x.data, before)


def test_adam_first_step_moves_each_parameter_by_lr():
    x = Tensor(np.array([0.0, 0.0]), requires_grad=True)
    opt = Adam({"x": x}, lr=0.01)
    opt.step({"x": np.array([4.0, -0.5])})
    np.testing.assert_allclose(x.data, [-0.01, 0.01], atol=1e-6)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def test_checkpoint_round_trip_is_exact(tmp_path):
    layer = Dense(3, 2, rng=np.random.default_rng(13))
    digest = spec_digest({"dense": [3, 2]})
    path = save_params(tmp_path / "dense.ckpt", layer.state_dict(), digest, {"note": "x"})
    params, header = load_params(path, digest)
    assert header["meta"] == {"note": "x"}
    for name, value in layer.state_dict().items():
        np.testing.assert_array_equal(params[name], value)


def test_checkpoint_rejects_other_spec(tmp_path):
    layer = Dense(3, 2)
    path = save_params(tmp_path / "dense.ckpt", layer.state_dict(), spec_digest("a"))
    with pytest.raises(CheckpointMismatchError):
        load_params(path, spec_digest("b"))


def test_checkpoint_rejects_bad_magic_and_truncation(tmp_path):
    bogus = tmp_path / "bogus.ckpt"
    bogus.write_bytes(b"NOTACKPT" + b"\x00" * 16)
    with pytest.raises(CheckpointMismatchError):
        load_params(bogus)

    path = save_params(tmp_path / "dense.ckpt", Dense(3, 2).state_dict(), spec_digest("a"))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(CheckpointMismatchError):
        load_params(path)


@pytest.mark.parametrize("tail", [
    b"\x01",                                              # header length cut short
    struct.pack("<I", 64) + b'{"spec',                    # header shorter than announced
    struct.pack("<I", 6) + b'{"spec',                     # header that is not JSON
    struct.pack("<I", 2) + b"[]",                         # JSON without the checkpoint keys
])
def test_checkpoint_rejects_damaged_headers(tmp_path, tail):
    path = tmp_path / "damaged.ckpt"
    path.write_bytes(MAGIC + tail)
    with pytest.raises(CheckpointMismatchError):
        load_params(path)
    with pytest.raises(CheckpointMismatchError):
        read_header(path)


def test_read_header_skips_parameters(tmp_path):
    path = save_params(tmp_path / "dense.ckpt", Dense(3, 2).state_dict(), spec_digest("a"), {"note": "y"})
    header = read_header(path)
    assert header["meta"] == {"note": "y"}
    assert [p["name"] for p in header["params"]] == list(Dense(3, 2).state_dict())
