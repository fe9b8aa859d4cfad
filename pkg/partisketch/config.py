"""Configuration settings for partisketch.

Thin property layer over the TOML-based ConfigManager so call sites read
``Config().MIN_WIDTH`` instead of dot paths.
"""

from .config_manager import get_config_manager


class Config:
    """Centralized configuration for partisketch."""

    def __init__(self):
        """Initialize configuration manager."""
        self._config_manager = get_config_manager()

    @property
    def DEPTH(self) -> int:
        return self._config_manager.get('sketch.depth', 5)

    @property
    def OUTLIER_FRACTION(self) -> float:
        return self._config_manager.get('partition.outlier_fraction', 0.10)

    @property
    def COLLISION_CONSTANT(self) -> float:
        return self._config_manager.get('partition.collision_constant', 0.2)

    @property
    def MIN_WIDTH(self) -> int:
        return self._config_manager.get('partition.min_width', 64)

    @property
    def G0(self) -> float:
        return self._config_manager.get('bench.g0', 5)

    @property
    def SAMPLE_FRACTION(self) -> float:
        return self._config_manager.get('bench.sample_fraction', 0.05)

    @property
    def QUERY_COUNT(self) -> int:
        return self._config_manager.get('bench.query_count', 2000)

    @property
    def SUBGRAPH_EDGES(self) -> int:
        return self._config_manager.get('bench.subgraph_edges', 10)

    @property
    def BUDGETS(self) -> list[int]:
        return list(self._config_manager.get('bench.budgets', [65536, 262144, 1048576]))

    @property
    def WORKLOAD_ALPHA(self) -> float:
        return self._config_manager.get('bench.workload_alpha', 1.5)

    @property
    def RMAT_SCALE(self) -> int:
        return self._config_manager.get('rmat.scale', 14)

    @property
    def RMAT_EDGES(self) -> int:
        return self._config_manager.get('rmat.edges', 500000)

    @property
    def RMAT_PROBABILITIES(self) -> tuple[float, float, float, float]:
        return tuple(self._config_manager.get(f'rmat.{q}') for q in ('a', 'b', 'c', 'd'))

    @property
    def RMAT_MAX_FREQ(self) -> int:
        return self._config_manager.get('rmat.max_freq', 1000)

    @property
    def LOG_LEVEL(self) -> str:
        return self._config_manager.get('logging.level', 'INFO')

    @property
    def LOG_FORMAT(self) -> str:
        return self._config_manager.get(
            'logging.format', '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )

    @property
    def LOG_DATE_FORMAT(self) -> str:
        return self._config_manager.get('logging.date_format', '%Y-%m-%d %H:%M:%S')

    @property
    def LOG_FILE(self) -> str:
        return self._config_manager.get('logging.file', '')
