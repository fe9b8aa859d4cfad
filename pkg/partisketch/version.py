"""Version information for partisketch.

The version is managed by python-semantic-release in pyproject.toml. Installed
wheels have no pyproject.toml next to the package, so package metadata is the
fallback.
"""

import tomllib
from importlib import metadata
from pathlib import Path
from typing import Any


def _get_pyproject_data() -> dict[str, Any]:
    """Get pyproject.toml data.

    Returns:
        Parsed TOML data
    """
    project_root = Path(__file__).parent.parent
    pyproject_file = project_root / 'pyproject.toml'

    with open(pyproject_file, 'rb') as f:
        return tomllib.load(f)


def _get_version() -> str:
    try:
        data = _get_pyproject_data()
        if data.get('project', {}).get('name') == 'partisketch':
            return data['project']['version']
    except (KeyError, FileNotFoundError):
        pass
    try:
        return metadata.version('partisketch')
    except metadata.PackageNotFoundError as e:
        raise ValueError(f'Version not found for partisketch: {e}') from e


__version__ = _get_version()


def get_version() -> str:
    """Get current version string."""
    return __version__


if __name__ == '__main__':
    print(f'partisketch version: {get_version()}')
