"""
Agent loader for instantiating offline agents from the agents registry.
"""
import importlib
import json
from pathlib import Path
from typing import Any, Dict, Optional, Type

from .base import OfflineAgent, RegistryError, UnknownAgentError

DEFAULT_REGISTRY = Path(__file__).resolve().parent.parent / "agents.json"


class AgentRegistry:
    """Registry of available offline agents."""

    def __init__(self, registry_path: Optional[Path] = None):
        self.registry_path = Path(registry_path) if registry_path is not None else DEFAULT_REGISTRY
        self._registry: Optional[Dict[str, Any]] = None

    def load_registry(self) -> Dict[str, Any]:
        """Load the agent registry from JSON file."""
        if self._registry is None:
            try:
                with open(self.registry_path, 'r') as f:
                    self._registry = json.load(f)
            except FileNotFoundError:
                raise RegistryError(f"Agent registry not found: {self.registry_path}")
            except json.JSONDecodeError as e:
                raise RegistryError(f"Invalid agent registry JSON: {e}")
        return self._registry

    def list_agents(self) -> Dict[str, Dict[str, Any]]:
        return self.load_registry().get('agents', {})

    def get_agent_info(self, agent_name: str) -> Dict[str, Any]:
        """
        Raises:
            UnknownAgentError: If agent not found in registry
        """
        agents = self.list_agents()
        if agent_name not in agents:
            raise UnknownAgentError(f"Agent '{agent_name}' not found. Available agents: {list(agents)}")
        return agents[agent_name]

    def get_default_agent_name(self) -> Optional[str]:
        agents = self.list_agents()
        for name, info in agents.items():
            if info.get('default', False):
                return name
        return next(iter(agents), None)

    def agent_class(self, agent_name: str) -> Type[OfflineAgent]:
        """
        Raises:
            UnknownAgentError: If agent not found
            RegistryError: If the entry names a module or class that is not an OfflineAgent
        """
        info = self.get_agent_info(agent_name)
        try:
            module_name, class_name = info['module'], info['class']
        except (KeyError, TypeError):
            raise RegistryError(f"Registry entry for '{agent_name}' needs 'module' and 'class'")
        try:
            module = importlib.import_module(module_name)
        except ImportError as e:
            raise RegistryError(f"Cannot import agent module '{module_name}': {e}")
        try:
            agent_class = getattr(module, class_name)
        except AttributeError:
            raise RegistryError(f"Cannot find agent class '{class_name}' in module '{module_name}'")
        if not (isinstance(agent_class, type) and issubclass(agent_class, OfflineAgent)):
            raise RegistryError(f"Agent class '{class_name}' is not an OfflineAgent subclass")
        return agent_class

    def create_agent(self, agent_name: Optional[str], cfg, env_config, seed: int = 0) -> OfflineAgent:
        if agent_name is None:
            agent_name = self.get_default_agent_name()
            if agent_name is None:
                raise RegistryError("No agents available in registry")
        return self.agent_class(agent_name)(cfg, env_config, seed)


# Global registry instance
_registry = AgentRegistry()


def get_agent(agent_name: Optional[str], cfg, env_config, seed: int = 0) -> OfflineAgent:
    """Convenience function to create an agent instance."""
    return _registry.create_agent(agent_name, cfg, env_config, seed)


def list_available_agents() -> Dict[str, Dict[str, Any]]:
    return _registry.list_agents()


def get_default_agent_name() -> Optional[str]:
    return _registry.get_default_agent_name()
