"""
Configuration loader for the pixel offline-RL bench.

Reads flat YAML configuration files (`key: value` lines with `#` comments).
Loads config.yml by default; POBENCH_CONFIG points at another file.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

logger = logging.getLogger('pobench.config_loader')


class ConfigLoader:
    """Load configuration values from a YAML file."""

    def __init__(self, config_path: Optional[Path] = None, required: bool = False):
        """
        Initialize config loader.

        Args:
            config_path: Path to a config file. If None, tries default locations.
            required: Raise FileNotFoundError instead of logging when the file is absent
        """
        if config_path is None:
            env_path = os.getenv("POBENCH_CONFIG")
            candidates = [Path(env_path)] if env_path else []
            candidates += [
                Path.cwd() / "config.yml",                   # Current working directory
                Path(__file__).parent / "config.yml",        # Project root
                Path.home() / ".pobench" / "config.yml",     # User home
            ]

            config_path = None
            for candidate in candidates:
                if candidate.exists():
                    config_path = candidate.resolve()
                    break

            if config_path is None:
                config_path = (Path(__file__).parent / "config.yml").resolve()

        self.config_path = Path(config_path)
        self.required = required
        self._config: Dict[str, Any] = {}
        self._load_config()

    def _load_config(self) -> None:
        """Load configuration from the YAML file."""
        config_path = self.config_path.resolve()

        if not config_path.exists():
            if self.required:
                raise FileNotFoundError(f"Config file not found: {config_path}")
            logger.warning(f"{config_path} not found, using built-in defaults")
            return

        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ValueError(f"Error parsing {config_path}: {e}")
        if not isinstance(loaded, dict):
            raise ValueError(f"{config_path} must contain key: value pairs")
        self._config = loaded
        logger.info(f"Loaded configuration from {config_path}")

    def as_dict(self) -> Dict[str, Any]:
        """Return a shallow copy of everything that was loaded."""
        return dict(self._config)

    def get(self, path: str, default: Any = None) -> Any:
        """
        Get configuration value by key; dots descend into nested sections.

        Args:
            path: Key such as "penalty_weight" or "presets.desk.n_transitions"
            default: Default value if not found

        Returns:
            Configuration value or default
        """
        if path in self._config:
            return self._config[path]

        value: Any = self._config
        for key in path.split("."):
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default
        return value

    def get_dict(self, section: str, default: Optional[Dict] = None) -> Dict[str, Any]:
        """Get an entire nested section as a dictionary."""
        result = self.get(section)
        if isinstance(result, dict):
            return result
        return default or {}

    def get_list(self, path: str, default: Optional[list] = None) -> list:
        """Get a value as a list; comma-separated strings are split."""
        value = self.get(path)
        if isinstance(value, list):
            return value
        if isinstance(value, str) and value.strip():
            return [item.strip() for item in value.split(",")]
        return list(default) if default is not None else []

    def get_bool(self, path: str, default: bool = False) -> bool:
        """Get a value as a boolean."""
        value = self.get(path)
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            return value.lower() in ("true", "yes", "1", "on")
        return default

    def get_int(self, path: str, default: int = 0) -> int:
        """Get a value as an integer."""
        value = self.get(path)
        if isinstance(value, bool):
            return default
        if isinstance(value, int):
            return value
        try:
            return int(value)
        except (TypeError, ValueError):
            return default

    def get_float(self, path: str, default: float = 0.0) -> float:
        """Get a value as a float."""
        value = self.get(path)
        if isinstance(value, bool):
            return default
        try:
            return float(value)
        except (TypeError, ValueError):
            return default

    def get_string(self, path: str, default: str = "") -> str:
        """Get a value as a string."""
        value = self.get(path)
        if value is None:
            return default
        return str(value)


# Global config instance
_config: Optional[ConfigLoader] = None


def load_config(config_path: Optional[Path] = None) -> ConfigLoader:
    """
    Load configuration and return loader instance.

    Args:
        config_path: Path to config file

    Returns:
        ConfigLoader instance
    """
    global _config
    _config = ConfigLoader(config_path)
    return _config


def get_config() -> ConfigLoader:
    """
    Get the global config instance.

    Raises:
        RuntimeError: If config not loaded yet
    """
    if _config is None:
        raise RuntimeError("Configuration not loaded. Call load_config() first.")
    return _config
