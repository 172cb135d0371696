"""
Layers, modules and spec-built networks on top of the Tensor tape.

All arrays are NHWC float64. Parameters are registered by name so that
checkpoints, optimizers and gradient checks see a stable ordering.
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BackwardError, ShapeError, SpecError
from .tensor import DTYPE, Tensor, as_tensor

ACTIVATIONS = ("linear", "relu", "elu", "tanh", "sigmoid")


def activate(x: Tensor, name: str) -> Tensor:
    if name == "linear":
        return x
    if name == "relu":
        return x.relu()
    if name == "elu":
        return x.elu()
    if name == "tanh":
        return x.tanh()
    if name == "sigmoid":
        return x.sigmoid()
    raise SpecError(f"Unknown activation '{name}'. Available: {ACTIVATIONS}")


def conv2d(x: Tensor, weight: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D cross-correlation.

    Args:
        x: (B, H, W, C_in)
        weight: (k, k, C_in, C_out)
        stride: spatial stride
        padding: zero padding on each border
    """
    k = weight.shape[0]
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0))) if padding else x.data
    windows = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    out = np.tensordot(windows, weight.data, axes=([3, 4, 5], [2, 0, 1]))
    ho, wo = out.shape[1], out.shape[2]
    w = weight.data

    def backward(g):
        gw = np.tensordot(windows, g, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
        gxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                gxp[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += g @ w[i, j].T
        if padding:
            gxp = gxp[:, padding:-padding, padding:-padding, :]
        return gxp, gw

    return Tensor._make(out, (x, weight), backward, "conv2d")


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


class Module:
    """Container of named parameters and child modules."""

    def __init__(self):
        self._params: Dict[str, Tensor] = {}
        self._modules: Dict[str, "Module"] = {}

    def add_param(self, name: str, value: np.ndarray) -> Tensor:
        param = Tensor(np.array(value, dtype=DTYPE), requires_grad=True, name=name)
        self._params[name] = param
        return param

    def add_module(self, name: str, module: "Module") -> "Module":
        self._modules[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        named: Dict[str, Tensor] = {}
        for name, param in self._params.items():
            named[f"{prefix}{name}"] = param
        for name, module in self._modules.items():
            named.update(module.named_parameters(f"{prefix}{name}."))
        return named

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise ShapeError(f"State mismatch: missing {missing}, unexpected {unexpected}")
        for name, param in params.items():
            value = np.asarray(state[name], dtype=DTYPE)
            if value.shape != param.shape:
                raise ShapeError(f"Parameter '{name}': expected {param.shape}, got {value.shape}")
            param.data = value.copy()

    def copy_from(self, other: "Module") -> None:
        self.load_state_dict(other.state_dict())

    def soft_update_from(self, other: "Module", tau: float) -> None:
        """self <- (1 - tau) * self + tau * other"""
        source = other.named_parameters()
        for name, param in self.named_parameters().items():
            param.data = (1.0 - tau) * param.data + tau * source[name].data

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def _fan_in_uniform(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense(Module):
    def __init__(self, in_features: int, out_features: int, activation: str = "linear",
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        self.weight = self.add_param("W", _fan_in_uniform(rng, in_features, (in_features, out_features)))
        self.bias = self.add_param("b", np.zeros(out_features))

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"Dense expected (..., {self.in_features}), got {x.shape}")
        return activate(x @ self.weight + self.bias, self.activation)


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel: int, stride: int = 1,
                 padding: int = 0, activation: str = "linear", rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        self.activation = activation
        fan_in = kernel * kernel * in_channels
        self.weight = self.add_param("W", _fan_in_uniform(rng, fan_in, (kernel, kernel, in_channels, out_channels)))
        self.bias = self.add_param("b", np.zeros(out_channels))

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 4 or x.shape[-1] != self.in_channels:
            raise ShapeError(f"Conv2d expected (B, H, W, {self.in_channels}), got {x.shape}")
        return activate(conv2d(x, self.weight, self.stride, self.padding) + self.bias, self.activation)


class LayerNorm(Module):
    def __init__(self, features: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gain = self.add_param("g", np.ones(features))
        self.bias = self.add_param("b", np.zeros(features))

    def forward(self, x: Tensor) -> Tensor:
        centered = x - x.mean(axis=-1, keepdims=True)
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / (var + self.eps).sqrt() * self.gain + self.bias


class GRUCell(Module):
    """Gated recurrent cell: h' = (1 - z) * n + z * h."""

    def __init__(self, input_size: int, hidden_size: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.w_x = self.add_param("Wx", _fan_in_uniform(rng, input_size, (input_size, 3 * hidden_size)))
        self.w_h = self.add_param("Wh", _fan_in_uniform(rng, hidden_size, (hidden_size, 3 * hidden_size)))
        self.b_x = self.add_param("bx", np.zeros(3 * hidden_size))
        self.b_h = self.add_param("bh", np.zeros(3 * hidden_size))

    def forward(self, x: Tensor, h: Tensor) -> Tensor:
        x, h = as_tensor(x), as_tensor(h)
        if x.shape[-1] != self.input_size or h.shape[-1] != self.hidden_size:
            raise ShapeError(f"GRUCell expected x (..., {self.input_size}) and h (..., {self.hidden_size}), "
                             f"got {x.shape} and {h.shape}")
        size = self.hidden_size
        gx = x @ self.w_x + self.b_x
        gh = h @ self.w_h + self.b_h
        r = (gx[..., :size] + gh[..., :size]).sigmoid()
        z = (gx[..., size:2 * size] + gh[..., size:2 * size]).sigmoid()
        n = (gx[..., 2 * size:] + r * gh[..., 2 * size:]).tanh()
        return (1.0 - z) * n + z * h

    def initial_state(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.hidden_size)))


# ============================================================================
# SPEC-BUILT NETWORKS
# ============================================================================

@dataclass(frozen=True)
class LayerSpec:
    """
    One layer of a NetworkSpec.

    kind: dense | conv | flatten | gru | layernorm
    width: dense/gru output width, conv output channels
    """
    kind: str
    width: int = 0
    kernel: int = 3
    stride: int = 1
    padding: int = 0
    activation: str = "linear"


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: Tuple[int, ...]
    layers: Tuple[LayerSpec, ...] = field(default_factory=tuple)

    def shapes(self) -> List[Tuple[int, ...]]:
        """Per-layer output shapes (without the batch axis)."""
        if not self.layers:
            raise SpecError("NetworkSpec needs at least one layer")
        shape = tuple(self.input_shape)
        shapes = []
        for index, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise SpecError(f"Layer {index}: unknown activation '{layer.activation}'")
            if layer.kind == "dense":
                if len(shape) < 1 or layer.width < 1:
                    raise SpecError(f"Layer {index}: dense needs a feature axis and width >= 1, got {shape}")
                shape = shape[:-1] + (layer.width,)
            elif layer.kind == "conv":
                if len(shape) != 3:
                    raise SpecError(f"Layer {index}: conv expects (H, W, C), got {shape}")
                h = conv_output_size(shape[0], layer.kernel, layer.stride, layer.padding)
                w = conv_output_size(shape[1], layer.kernel, layer.stride, layer.padding)
                if h < 1 or w < 1 or layer.width < 1:
                    raise SpecError(f"Layer {index}: conv k={layer.kernel} s={layer.stride} does not fit {shape}")
                shape = (h, w, layer.width)
            elif layer.kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif layer.kind == "gru":
                if len(shape) != 2:
                    raise SpecError(f"Layer {index}: gru expects (T, F), got {shape}")
                shape = (shape[0], layer.width)
            elif layer.kind == "layernorm":
                pass
            else:
                raise SpecError(f"Layer {index}: unknown kind '{layer.kind}'")
            shapes.append(shape)
        return shapes

    @property
    def output_shape(self) -> Tuple[int, ...]:
        return self.shapes()[-1]

    def spec_hash(self) -> str:
        payload = json.dumps({"input_shape": list(self.input_shape),
                              "layers": [asdict(layer) for layer in self.layers]}, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class _Flatten(Module):
    def forward(self, x: Tensor) -> Tensor:
        return x.reshape(x.shape[0], -1)


class _Recurrent(Module):
    """Unrolls a GRUCell over the time axis of (B, T, F) from a zero state."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        super().__init__()
        self.cell = self.add_module("cell", GRUCell(input_size, hidden_size, rng))

    def forward(self, x: Tensor) -> Tensor:
        from .tensor import stack
        h = self.cell.initial_state(x.shape[0])
        outputs = []
        for t in range(x.shape[1]):
            h = self.cell(x[:, t], h)
            outputs.append(h)
        return stack(outputs, axis=1)


class Network(Module):
    """Feed-forward stack built from a NetworkSpec, with forward/backward bookkeeping."""

    def __init__(self, spec: NetworkSpec, seed: int = 0):
        super().__init__()
        self.spec = spec
        shapes = [tuple(spec.input_shape)] + spec.shapes()
        rng = np.random.default_rng(seed)
        self.layers: List[Module] = []
        for index, layer in enumerate(spec.layers):
            shape_in = shapes[index]
            if layer.kind == "dense":
                module = Dense(shape_in[-1], layer.width, layer.activation, rng)
            elif layer.kind == "conv":
                module = Conv2d(shape_in[-1], layer.width, layer.kernel, layer.stride,
                                layer.padding, layer.activation, rng)
            elif layer.kind == "flatten":
                module = _Flatten()
            elif layer.kind == "gru":
                module = _Recurrent(shape_in[-1], layer.width, rng)
            else:
                module = LayerNorm(shape_in[-1])
            self.layers.append(self.add_module(f"l{index}", module))
        self._last_output: Optional[Tensor] = None

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return tuple(self.spec.input_shape)

    @property
    def output_shape(self) -> Tuple[int, ...]:
        return self.spec.output_shape

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"Network expected input (batch, {', '.join(map(str, self.input_shape))}), "
                             f"got {x.shape}")
        for module, layer in zip(self.layers, self.spec.layers):
            x = module(x)
            if layer.kind == "gru" and layer.activation != "linear":
                x = activate(x, layer.activation)
        self._last_output = x
        return x

    def backward(self, upstream_grad: np.ndarray) -> Dict[str, np.ndarray]:
        """Gradients of sum(output * upstream_grad) for every parameter (zeros where unused)."""
        if self._last_output is None:
            raise BackwardError("backward() called before forward()")
        output, self._last_output = self._last_output, None
        self.zero_grad()
        output.backward(np.asarray(upstream_grad, dtype=DTYPE))
        return {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in self.named_parameters().items()}

