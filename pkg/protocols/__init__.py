"""
Experiment protocols: standard grid, distraction, multitask dynamics,
dataset scaling and the world model epoch sweep.
"""
from typing import Dict, Type

from .base_protocol import (BaseProtocol, Cell, DatasetRequest, ProtocolError, SeedRun, episode_multiple)
from .standard import StandardProtocol
from .distraction import DistractionProtocol, parse_fractions
from .multitask import MultitaskProtocol
from .scaling import ScalingProtocol, parse_multipliers
from .model_epochs import ModelEpochProtocol, parse_checkpoints

PROTOCOLS: Dict[str, Type[BaseProtocol]] = {
    "standard": StandardProtocol,
    "distraction": DistractionProtocol,
    "multitask": MultitaskProtocol,
    "scaling": ScalingProtocol,
    "model_epochs": ModelEpochProtocol,
}


def get_protocol(name: str) -> Type[BaseProtocol]:
    if name not in PROTOCOLS:
        raise KeyError(f"Protocol '{name}' not found. Available protocols: {list(PROTOCOLS)}")
    return PROTOCOLS[name]


__all__ = [
    'BaseProtocol', 'Cell', 'DatasetRequest', 'SeedRun', 'ProtocolError', 'episode_multiple',
    'StandardProtocol', 'DistractionProtocol', 'MultitaskProtocol', 'ScalingProtocol', 'ModelEpochProtocol',
    'parse_fractions', 'parse_multipliers', 'parse_checkpoints',
    'PROTOCOLS', 'get_protocol',
]
