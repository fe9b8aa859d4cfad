"""Configuration management for partisketch using TOML."""

import copy
import logging
import math
import tomllib
from pathlib import Path
from typing import Any

import tomli_w

from partisketch.error_handling import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULTS: dict[str, Any] = {
    'sketch': {
        'depth': 5,
    },
    'partition': {
        'outlier_fraction': 0.10,
        'collision_constant': 0.2,
        'min_width': 64,
    },
    'rmat': {
        'scale': 14,
        'edges': 500000,
        'a': 0.45,
        'b': 0.15,
        'c': 0.15,
        'd': 0.25,
        'max_freq': 1000,
    },
    'bench': {
        'g0': 5,
        'sample_fraction': 0.05,
        'query_count': 2000,
        'subgraph_edges': 10,
        'budgets': [65536, 262144, 1048576],
        'workload_alpha': 1.5,
    },
    'logging': {
        'level': 'INFO',
        'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        'date_format': '%Y-%m-%d %H:%M:%S',
        'file': '',
    },
}


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigManager:
    """Manages configuration settings from an optional TOML file over built-in defaults."""

    def __init__(self, config_file: str | Path | None = None):
        """Initialize configuration manager.

        Args:
            config_file: Path to TOML configuration file. If None, built-in defaults only.
        """
        self.config_file = Path(config_file) if config_file is not None else None
        self._config: dict[str, Any] = {}
        self._load_config()

    def _load_config(self) -> None:
        """Load configuration from TOML file."""
        if self.config_file is None:
            self._config = copy.deepcopy(DEFAULTS)
            return

        try:
            with open(self.config_file, 'rb') as f:
                user_config = tomllib.load(f)
        except FileNotFoundError as e:
            raise ConfigurationError(
                f'Configuration file not found: {self.config_file}',
                config_key='config_file',
                actual_value=str(self.config_file),
                cause=e,
            ) from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(
                f'Invalid TOML configuration file {self.config_file}: {e}',
                config_key='config_file',
                cause=e,
            ) from e

        self._config = _merge(DEFAULTS, user_config)
        logger.info(f'Loaded configuration from {self.config_file}')

    def get(self, key_path: str, default: Any = None) -> Any:
        """Get configuration value using dot notation.

        Args:
            key_path: Dot-separated path to configuration value (e.g., 'partition.min_width')
            default: Default value if key is not found

        Returns:
            Configuration value or default

        Examples:
            >>> config.get('sketch.depth')
            5
            >>> config.get('bench.missing', 30)
            30
        """
        keys = key_path.split('.')
        value = self._config

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def validate(self) -> None:
        """Validate configuration settings.

        Raises:
            ConfigurationError: If a value is out of range
        """
        for key in ('partition.outlier_fraction', 'partition.collision_constant'):
            value = self.get(key)
            if not isinstance(value, int | float) or not 0 < value < 1:
                raise ConfigurationError(
                    f'{key} must lie strictly between 0 and 1',
                    config_key=key,
                    expected_type='(0, 1)',
                    actual_value=value,
                )

        for key in ('partition.min_width', 'sketch.depth', 'bench.query_count'):
            value = self.get(key)
            if not isinstance(value, int) or value < 1:
                raise ConfigurationError(
                    f'{key} must be a positive integer',
                    config_key=key,
                    expected_type='int >= 1',
                    actual_value=value,
                )

        g0 = self.get('bench.g0')
        if not isinstance(g0, int | float) or g0 <= 0:
            raise ConfigurationError(
                'bench.g0 must be positive', config_key='bench.g0', actual_value=g0
            )

        probabilities = [self.get(f'rmat.{q}') for q in ('a', 'b', 'c', 'd')]
        if any(not 0 <= p <= 1 for p in probabilities) or not math.isclose(
            sum(probabilities), 1.0, abs_tol=1e-9
        ):
            raise ConfigurationError(
                'rmat.a + rmat.b + rmat.c + rmat.d must sum to 1',
                config_key='rmat',
                actual_value=probabilities,
            )

    def to_dict(self) -> dict[str, Any]:
        """Get all configuration as dictionary.

        Returns:
            Complete configuration dictionary
        """
        return copy.deepcopy(self._config)

    def dump(self, path: str | Path, overrides: dict[str, Any] | None = None) -> None:
        """Write the effective configuration as TOML.

        Args:
            path: Destination file
            overrides: Extra values merged over the effective configuration (e.g. CLI flags)
        """
        data = _merge(self._config, overrides or {})
        with open(path, 'wb') as f:
            tomli_w.dump(data, f)


# Global configuration instance
_config_manager: ConfigManager | None = None


def get_config_manager() -> ConfigManager:
    """Get global configuration manager instance.

    Returns:
        Global ConfigManager instance
    """
    global _config_manager
    if _config_manager is None:
        _config_manager = ConfigManager()
    return _config_manager


def load_config_file(config_file: str | Path | None) -> ConfigManager:
    """Replace the global configuration with one loaded from a file.

    Args:
        config_file: TOML file, or None to reset to built-in defaults

    Returns:
        The new global ConfigManager
    """
    global _config_manager
    _config_manager = ConfigManager(config_file)
    _config_manager.validate()
    return _config_manager
