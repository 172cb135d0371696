"""
Minimal float64 neural-network toolkit: tape autograd, layers, Adam, gradient checks, checkpoints.
"""
from .errors import BackwardError, CheckpointMismatchError, NNError, ShapeError, SpecError
from .tensor import (Tensor, as_tensor, concat, maximum, minimum, no_grad, stack,
                     straight_through_from_probs, straight_through_onehot)
from .layers import (Conv2d, Dense, GRUCell, LayerNorm, LayerSpec, Module, Network, NetworkSpec,
                     conv2d, conv_output_size)
from .optim import Adam, AdamState, StepReport, adam_step
from .gradcheck import grad_check, grad_check_fn, relative_error
from .checkpoint import load_into, load_params, read_header, save_params, spec_digest

__all__ = [
    'NNError', 'ShapeError', 'BackwardError', 'SpecError', 'CheckpointMismatchError',
    'Tensor', 'as_tensor', 'concat', 'stack', 'maximum', 'minimum', 'no_grad',
    'straight_through_onehot', 'straight_through_from_probs',
    'Module', 'Dense', 'Conv2d', 'LayerNorm', 'GRUCell', 'LayerSpec', 'NetworkSpec', 'Network',
    'conv2d', 'conv_output_size',
    'Adam', 'AdamState', 'StepReport', 'adam_step',
    'grad_check', 'grad_check_fn', 'relative_error',
    'save_params', 'load_params', 'read_header', 'load_into', 'spec_digest',
]
