"""CountMin sketch over edge keys.

A ``depth x width`` grid of unsigned 64-bit counters. Row ``i`` maps a key to
``((a_i * x + b_i) mod P) mod width`` where ``x`` is a seedless 64-bit MurmurHash3
fingerprint of the key reduced mod ``P = 2**61 - 1`` and ``(a_i, b_i)`` are drawn
from the sketch seed. Estimates take the minimum over rows, so they never fall
below the true count and exceed it by at most ``e * N / width`` with probability
at least ``1 - e**-depth``.

Two distinct keys share a fingerprint with probability about ``2**-64``; such a
pair is indistinguishable to every row.
"""

import logging
import math
import struct
from collections.abc import Iterable
from dataclasses import dataclass

import mmh3
import numpy as np

from partisketch.error_handling import (
    ConfigurationError,
    CounterOverflowError,
    StorageError,
    validate_open_unit_interval,
)

logger = logging.getLogger(__name__)

MERSENNE_PRIME = (1 << 61) - 1
COUNTER_MAX = (1 << 64) - 1
COUNTER_BYTES = 8

SNAPSHOT_MAGIC = b'PSCM'
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct('<4sHHQQQ')
_ROW_PARAMS = struct.Struct('<QQ')
_TOTAL = struct.Struct('<Q')


@dataclass(frozen=True)
class SketchDims:
    """Width and depth of a CountMin grid."""

    width: int
    depth: int

    def __post_init__(self):
        for name in ('width', 'depth'):
            value = getattr(self, name)
            if not isinstance(value, int | np.integer) or value < 1:
                raise ConfigurationError(
                    f'Sketch {name} must be a positive integer, got {value}',
                    config_key=name,
                    expected_type='int >= 1',
                    actual_value=value,
                )

    @classmethod
    def from_error_bounds(cls, epsilon: float, delta: float) -> 'SketchDims':
        """Dimensions guaranteeing error ``epsilon * N`` with probability ``1 - delta``.

        Examples:
            >>> SketchDims.from_error_bounds(0.01, 0.01)
            SketchDims(width=272, depth=5)
        """
        validate_open_unit_interval(epsilon, 'epsilon')
        validate_open_unit_interval(delta, 'delta')
        width = math.ceil(math.e / float(epsilon))
        depth = math.ceil(math.log(1 / float(delta)))
        return cls(width, depth)

    @classmethod
    def from_byte_budget(cls, budget_bytes: int, depth: int) -> 'SketchDims':
        """Widest grid of the given depth that fits in ``budget_bytes``."""
        if depth < 1:
            raise ConfigurationError(
                f'Sketch depth must be a positive integer, got {depth}',
                config_key='depth',
                actual_value=depth,
            )
        width = budget_bytes // (COUNTER_BYTES * depth)
        if width < 1:
            raise ConfigurationError(
                f'Budget of {budget_bytes} bytes is too small for depth {depth}; '
                f'need at least {COUNTER_BYTES * depth}',
                config_key='budget_bytes',
                expected_type=f'>= {COUNTER_BYTES * depth}',
                actual_value=budget_bytes,
            )
        return cls(width, depth)

    @property
    def memory_bytes(self) -> int:
        return self.width * self.depth * COUNTER_BYTES


def fingerprint(key: bytes) -> int:
    """Seedless 64-bit fingerprint of a key, reduced into the row-hash field."""
    return mmh3.hash64(key, seed=0, signed=False)[0] % MERSENNE_PRIME


class CountMinSketch:
    """CountMin sketch with pairwise-independent row hashes."""

    def __init__(self, dims: SketchDims, seed: int):
        """Create a zeroed sketch.

        Args:
            dims: Grid dimensions
            seed: Non-negative seed for the row hash parameters
        """
        if not isinstance(seed, int | np.integer) or not 0 <= seed <= COUNTER_MAX:
            raise ConfigurationError(
                f'Sketch seed must be an unsigned 64-bit integer, got {seed}',
                config_key='seed',
                actual_value=seed,
            )
        self._dims = dims
        self._seed = int(seed)
        rng = np.random.default_rng(self._seed)
        self._a = [int(v) for v in rng.integers(1, MERSENNE_PRIME, size=dims.depth, dtype=np.int64)]
        self._b = [int(v) for v in rng.integers(0, MERSENNE_PRIME, size=dims.depth, dtype=np.int64)]
        self._counters = np.zeros((dims.depth, dims.width), dtype=np.uint64)
        self._total_mass = 0

    @classmethod
    def with_dims(cls, width: int, depth: int, seed: int) -> 'CountMinSketch':
        return cls(SketchDims(width, depth), seed)

    @classmethod
    def from_error_bounds(cls, epsilon: float, delta: float, seed: int) -> 'CountMinSketch':
        return cls(SketchDims.from_error_bounds(epsilon, delta), seed)

    @property
    def dims(self) -> SketchDims:
        return self._dims

    @property
    def width(self) -> int:
        return self._dims.width

    @property
    def depth(self) -> int:
        return self._dims.depth

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def total_mass(self) -> int:
        return self._total_mass

    @property
    def counters(self) -> np.ndarray:
        """Read-only view of the counter grid."""
        view = self._counters.view()
        view.flags.writeable = False
        return view

    def row_indices(self, key: bytes) -> list[int]:
        """Cell index of ``key`` in every row."""
        x = fingerprint(key)
        width = self._dims.width
        return [((a * x + b) % MERSENNE_PRIME) % width for a, b in zip(self._a, self._b, strict=True)]

    def _reserve(self, delta: int) -> None:
        if self._total_mass + delta > COUNTER_MAX:
            raise CounterOverflowError(
                f'Adding {delta} to total mass {self._total_mass} overflows 64-bit counters',
                context={'total_mass': self._total_mass, 'delta': delta},
            )
        self._total_mass += delta

    def update(self, key: bytes, delta: int = 1) -> None:
        """Add ``delta`` to the key's cell in every row.

        Raises:
            ConfigurationError: If delta is not a positive integer
            CounterOverflowError: If a counter would exceed 2**64 - 1
        """
        if delta < 1:
            raise ConfigurationError(
                f'Update delta must be >= 1, got {delta}', config_key='delta', actual_value=delta
            )
        self._reserve(delta)
        step = np.uint64(delta)
        for row, column in enumerate(self.row_indices(key)):
            self._counters[row, column] += step

    def update_many(self, items: Iterable[tuple[bytes, int]]) -> None:
        """Apply many ``(key, delta)`` updates with one vectorized add per row."""
        keys: list[bytes] = []
        deltas: list[int] = []
        for key, delta in items:
            if delta < 1:
                raise ConfigurationError(
                    f'Update delta must be >= 1, got {delta}', config_key='delta', actual_value=delta
                )
            keys.append(key)
            deltas.append(delta)
        if not keys:
            return

        self._reserve(sum(deltas))
        width = self._dims.width
        fingerprints = [fingerprint(key) for key in keys]
        weights = np.asarray(deltas, dtype=np.uint64)
        for row, (a, b) in enumerate(zip(self._a, self._b, strict=True)):
            columns = np.fromiter(
                (((a * x + b) % MERSENNE_PRIME) % width for x in fingerprints),
                dtype=np.int64,
                count=len(fingerprints),
            )
            np.add.at(self._counters[row], columns, weights)

    def estimate(self, key: bytes) -> int:
        """Minimum over rows of the key's counters."""
        return min(int(self._counters[row, column]) for row, column in enumerate(self.row_indices(key)))

    def error_bound(self) -> float:
        """Additive overestimate ``e * N / width`` that holds with probability ``confidence()``."""
        return math.e * self._total_mass / self._dims.width

    def confidence(self) -> float:
        return 1 - math.exp(-self._dims.depth)

    def to_bytes(self) -> bytes:
        """Versioned little-endian snapshot: header, row parameters, counters, total mass."""
        parts = [
            _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, 0, self.width, self.depth, self._seed),
            *(_ROW_PARAMS.pack(a, b) for a, b in zip(self._a, self._b, strict=True)),
            self._counters.astype('<u8').tobytes(order='C'),
            _TOTAL.pack(self._total_mass),
        ]
        return b''.join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> 'CountMinSketch':
        """Rebuild a sketch from ``to_bytes`` output.

        Raises:
            StorageError: On bad magic, unknown version or truncated data
        """
        if len(data) < _HEADER.size:
            raise StorageError('Sketch snapshot is truncated', operation='from_bytes')
        magic, version, _reserved, width, depth, seed = _HEADER.unpack_from(data, 0)
        if magic != SNAPSHOT_MAGIC:
            raise StorageError(f'Not a sketch snapshot (magic {magic!r})', operation='from_bytes')
        if version != SNAPSHOT_VERSION:
            raise StorageError(f'Unsupported sketch snapshot version {version}', operation='from_bytes')

        expected = _HEADER.size + depth * _ROW_PARAMS.size + width * depth * COUNTER_BYTES + _TOTAL.size
        if len(data) != expected:
            raise StorageError(
                f'Sketch snapshot has {len(data)} bytes, expected {expected}',
                operation='from_bytes',
            )

        sketch = cls(SketchDims(width, depth), seed)
        offset = _HEADER.size
        row_params = []
        for _ in range(depth):
            row_params.append(_ROW_PARAMS.unpack_from(data, offset))
            offset += _ROW_PARAMS.size
        sketch._a = [a for a, _ in row_params]
        sketch._b = [b for _, b in row_params]
        grid_bytes = width * depth * COUNTER_BYTES
        sketch._counters = (
            np.frombuffer(data, dtype='<u8', count=width * depth, offset=offset)
            .astype(np.uint64)
            .reshape(depth, width)
        )
        (sketch._total_mass,) = _TOTAL.unpack_from(data, offset + grid_bytes)
        return sketch

    def __repr__(self) -> str:
        return f'CountMinSketch(width={self.width}, depth={self.depth}, total_mass={self._total_mass})'
