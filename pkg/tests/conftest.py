"""Shared pytest fixtures."""

import pytest

from partisketch import config_manager


@pytest.fixture(autouse=True)
def default_config():
    """Every test starts from the built-in configuration."""
    config_manager._config_manager = None
    yield
    config_manager._config_manager = None
