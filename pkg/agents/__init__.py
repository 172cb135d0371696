"""
Offline agents: Offline DV2, DrQ+BC, CQL and BC behind one train/act interface.
"""
from .base import (AgentError, NumericAbortError, ObservationShapeError, OfflineAgent, Phase, RegistryError, TrainResult,
                   UnknownAgentError)


# Lazy imports so that loading the base interface does not build every agent module
def __getattr__(name):
    if name in ('AgentRegistry', 'get_agent', 'list_available_agents', 'get_default_agent_name'):
        from . import loader
        return getattr(loader, name)
    raise AttributeError(f"module '{__name__}' has no attribute '{name}'")


__all__ = [
    'OfflineAgent', 'Phase', 'TrainResult', 'AgentError', 'NumericAbortError', 'ObservationShapeError',
    'RegistryError', 'UnknownAgentError',
    'AgentRegistry', 'get_agent', 'list_available_agents', 'get_default_agent_name',
]
