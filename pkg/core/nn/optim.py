"""
Adam with bias correction, gradient-norm clipping and refusal of non-finite steps.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

import numpy as np

from .tensor import Tensor

logger = logging.getLogger('pobench.nn.optim')


@dataclass
class AdamState:
    """Moment estimates keyed by parameter name."""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class StepReport:
    applied: bool
    t: int
    grad_norm: float
    non_finite: List[str] = field(default_factory=list)

    @property
    def diagnostic(self) -> str:
        if self.applied:
            return ""
        return f"step refused at t={self.t}: non-finite gradients in {', '.join(self.non_finite)}"


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, Optional[np.ndarray]], lr: float,
              state: AdamState, clip_norm: float = 0.0) -> StepReport:
    """
    Apply one bias-corrected Adam update in place.

    Missing or None gradients count as zero. A step with any non-finite
    gradient is refused: parameters and state stay untouched.
    """
    arrays = {name: (np.zeros_like(p.data) if grads.get(name) is None else np.asarray(grads[name]))
              for name, p in params.items()}
    bad = [name for name, g in arrays.items() if not np.all(np.isfinite(g))]
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for name, g in arrays.items() if name not in bad)))
    if bad:
        report = StepReport(applied=False, t=state.t, grad_norm=norm, non_finite=bad)
        logger.warning(report.diagnostic)
        return report

    if clip_norm and norm > clip_norm:
        scale = clip_norm / (norm + 1e-12)
        arrays = {name: g * scale for name, g in arrays.items()}

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.t
    correction2 = 1.0 - b2 ** state.t
    for name, param in params.items():
        g = arrays[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name] = m
        state.v[name] = v
        param.data = param.data - lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return StepReport(applied=True, t=state.t, grad_norm=norm)


class Adam:
    """Optimizer bound to a named parameter set."""

    def __init__(self, params: Mapping[str, Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, clip_norm: float = 0.0):
        self.params = dict(params)
        self.lr = lr
        self.clip_norm = clip_norm
        self.state = AdamState(beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.grad = None

    def step(self, grads: Optional[Mapping[str, Optional[np.ndarray]]] = None) -> StepReport:
        """Update from explicit gradients, or from each parameter's `.grad`."""
        if grads is None:
            grads = {name: p.grad for name, p in self.params.items()}
        return adam_step(self.params, grads, self.lr, self.state, self.clip_norm)
