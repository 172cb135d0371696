"""
Central-difference gradient checks against the Tensor tape.
"""
from typing import Callable, Mapping, Optional

import numpy as np

from .layers import Network
from .tensor import Tensor, no_grad

MAX_CHECK_PARAMETERS = 10_000


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)


def grad_check_fn(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor], step: float = 1e-5) -> float:
    """
    Max relative error between tape gradients and central differences.

    Args:
        loss_fn: builds a scalar Tensor from the current parameter values
        params: parameters to perturb
        step: finite-difference step
    """
    total = sum(p.size for p in params.values())
    if total >= MAX_CHECK_PARAMETERS:
        raise ValueError(f"grad_check needs < {MAX_CHECK_PARAMETERS} parameters, got {total}")

    for param in params.values():
        param.grad = None
    loss_fn().backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params.items()}

    worst = 0.0
    with no_grad():
        for name, param in params.items():
            flat = param.data.reshape(-1)
            numeric = np.zeros_like(flat)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + step
                plus = loss_fn().item()
                flat[i] = original - step
                minus = loss_fn().item()
                flat[i] = original
                numeric[i] = (plus - minus) / (2.0 * step)
            error = relative_error(analytic[name].reshape(-1), numeric)
            if error.size:
                worst = max(worst, float(error.max()))
    return worst


def grad_check(net: Network, x: np.ndarray, step: float = 1e-5, seed: Optional[int] = 0) -> float:
    """
    Check `net` on input `x` through a fixed random linear readout of its output.

    Returns:
        max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=np.float64)
    readout = rng.standard_normal((x.shape[0],) + tuple(net.output_shape))

    def loss() -> Tensor:
        return (net.forward(x) * readout).sum()

    return grad_check_fn(loss, net.named_parameters(), step)
