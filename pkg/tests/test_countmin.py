"""Tests for the CountMin sketch."""

import math
import random
from collections import Counter

import numpy as np
import pytest
from scipy import stats as scipy_stats

from partisketch.countmin import CountMinSketch, SketchDims, fingerprint
from partisketch.error_handling import ConfigurationError, CounterOverflowError, StorageError


@pytest.fixture
def sketch():
    """Small sketch for unit tests."""
    return CountMinSketch.with_dims(64, 4, seed=11)


class TestSketchDims:
    """Test dimension helpers."""

    def test_from_error_bounds(self):
        """Test epsilon=delta=0.01 gives 272 x 5."""
        assert SketchDims.from_error_bounds(0.01, 0.01) == SketchDims(272, 5)

    def test_from_loose_error_bounds(self):
        """Test epsilon=0.9, delta=0.5 gives 4 x 1."""
        assert SketchDims.from_error_bounds(0.9, 0.5) == SketchDims(4, 1)

    @pytest.mark.parametrize(('epsilon', 'delta'), [(1.0, 0.1), (0.0, 0.1), (0.1, 1.0)])
    def test_error_bounds_out_of_range(self, epsilon, delta):
        """Test bounds must be strictly inside (0, 1)."""
        with pytest.raises(ConfigurationError):
            SketchDims.from_error_bounds(epsilon, delta)

    def test_from_byte_budget(self):
        """Test budgets divide into 8-byte counters per row."""
        dims = SketchDims.from_byte_budget(65536, 4)
        assert dims == SketchDims(2048, 4)
        assert dims.memory_bytes == 65536

    def test_byte_budget_floor(self):
        """Test leftover bytes are dropped."""
        assert SketchDims.from_byte_budget(8 * 5 + 7, 5).width == 1

    def test_byte_budget_too_small(self):
        """Test a budget below one column is rejected."""
        with pytest.raises(ConfigurationError):
            SketchDims.from_byte_budget(39, 5)

    @pytest.mark.parametrize(('width', 'depth'), [(0, 3), (3, 0), (-1, 1)])
    def test_invalid_dims(self, width, depth):
        """Test non-positive dimensions are rejected."""
        with pytest.raises(ConfigurationError):
            SketchDims(width, depth)


class TestConstruction:
    """Test sketch construction."""

    def test_zero_grid(self):
        """Test a new sketch is a zeroed depth x width grid."""
        sketch = CountMinSketch.with_dims(8, 3, seed=1)

        assert sketch.counters.shape == (3, 8)
        assert not sketch.counters.any()
        assert sketch.total_mass == 0

    def test_single_cell(self):
        """Test 1 x 1 sketches are allowed."""
        assert CountMinSketch.with_dims(1, 1, seed=0).counters.shape == (1, 1)

    def test_zero_width_rejected(self):
        """Test zero width is a configuration error."""
        with pytest.raises(ConfigurationError):
            CountMinSketch.with_dims(0, 3, seed=0)

    def test_negative_seed_rejected(self):
        """Test seeds must be unsigned."""
        with pytest.raises(ConfigurationError):
            CountMinSketch.with_dims(8, 3, seed=-1)

    def test_counters_read_only(self, sketch):
        """Test the counter view cannot be written."""
        with pytest.raises(ValueError):
            sketch.counters[0, 0] = 5

    def test_row_indices_in_range(self, sketch):
        """Test every row maps into the width."""
        for i in range(200):
            assert all(0 <= col < sketch.width for col in sketch.row_indices(f'k{i}'.encode()))

    def test_rows_spread_uniformly(self, sketch):
        """Test distinct keys fill each row's cells evenly by a chi-squared test."""
        hits = np.zeros((sketch.depth, sketch.width), dtype=np.int64)
        for i in range(20_000):
            for row, col in enumerate(sketch.row_indices(f'v{i}\x1fv{i * 7}'.encode())):
                hits[row, col] += 1

        for row in hits:
            assert scipy_stats.chisquare(row).pvalue > 1e-4

    def test_same_seed_same_hashes(self):
        """Test hash parameters are a function of the seed."""
        one = CountMinSketch.with_dims(97, 5, seed=42)
        two = CountMinSketch.with_dims(97, 5, seed=42)
        assert one.row_indices(b'a\x1fb') == two.row_indices(b'a\x1fb')

    def test_fingerprint_is_seedless(self):
        """Test fingerprints do not depend on any sketch."""
        assert fingerprint(b'x') == fingerprint(b'x')
        assert fingerprint(b'x') != fingerprint(b'y')


class TestUpdateAndEstimate:
    """Test updates and point estimates."""

    def test_single_key_exact(self, sketch):
        """Test one update is estimated exactly."""
        sketch.update(b'k', 1)
        assert sketch.estimate(b'k') == 1

    def test_additive(self, sketch):
        """Test repeated updates accumulate."""
        sketch.update(b'k', 2)
        sketch.update(b'k', 3)
        assert sketch.estimate(b'k') == 5
        assert sketch.total_mass == 5

    def test_single_cell_collides(self):
        """Test all keys share the one cell of a 1 x 1 sketch."""
        sketch = CountMinSketch.with_dims(1, 1, seed=0)
        sketch.update(b'a', 3)
        sketch.update(b'b', 4)
        assert sketch.estimate(b'a') == 7

    def test_fresh_sketch_estimates_zero(self, sketch):
        """Test unseen keys estimate zero on an empty sketch."""
        assert sketch.estimate(b'anything') == 0

    def test_rejects_zero_delta(self, sketch):
        """Test deltas must be positive."""
        with pytest.raises(ConfigurationError):
            sketch.update(b'k', 0)

    def test_mass_equals_row_sums(self, sketch):
        """Test every row sums to the total mass."""
        for i in range(300):
            sketch.update(f'k{i % 37}'.encode(), i % 5 + 1)
        assert all(int(row.sum()) == sketch.total_mass for row in sketch.counters)

    def test_update_many_matches_update(self):
        """Test batched and single updates give the same grid."""
        items = [(f'k{i % 50}'.encode(), i % 3 + 1) for i in range(1000)]
        single = CountMinSketch.with_dims(32, 3, seed=9)
        batched = CountMinSketch.with_dims(32, 3, seed=9)
        for key, delta in items:
            single.update(key, delta)
        batched.update_many(items)

        assert np.array_equal(single.counters, batched.counters)
        assert single.total_mass == batched.total_mass

    def test_overflow(self, sketch):
        """Test mass beyond 64 bits is refused before any counter changes."""
        sketch.update(b'k', (1 << 64) - 1)
        with pytest.raises(CounterOverflowError):
            sketch.update(b'k', 1)
        assert sketch.estimate(b'k') == (1 << 64) - 1

    def test_never_underestimates(self):
        """Test estimates are at least the true counts after many insertions."""
        rng = random.Random(4)
        truth = Counter()
        sketch = CountMinSketch.with_dims(128, 4, seed=4)
        for _ in range(10_000):
            key = f'k{rng.randrange(2000)}'.encode()
            truth[key] += 1
            sketch.update(key)
        assert all(sketch.estimate(key) >= count for key, count in truth.items())

    def test_upper_bound_holds_with_confidence(self):
        """Test few keys exceed truth + e*N/w with w=128, d=4, N=1e5."""
        rng = np.random.default_rng(2)
        keys = [f'k{i}'.encode() for i in range(5000)]
        picks = rng.integers(0, len(keys), size=100_000)
        truth = Counter(picks.tolist())
        sketch = CountMinSketch.with_dims(128, 4, seed=2)
        sketch.update_many((keys[index], count) for index, count in truth.items())

        bound = sketch.error_bound()
        assert bound == pytest.approx(math.e * 100_000 / 128)
        violations = sum(1 for index, count in truth.items() if sketch.estimate(keys[index]) > count + bound)
        assert violations / len(truth) <= math.exp(-4) + 0.01

    def test_confidence(self, sketch):
        """Test confidence is 1 - e^-depth."""
        assert sketch.confidence() == pytest.approx(1 - math.exp(-4))


class TestSnapshot:
    """Test byte snapshots."""

    def test_restore_preserves_estimates(self, sketch):
        """Test a restored sketch answers identically."""
        for i in range(100):
            sketch.update(f'k{i}'.encode(), i + 1)
        restored = CountMinSketch.from_bytes(sketch.to_bytes())

        assert restored.total_mass == sketch.total_mass
        assert restored.seed == sketch.seed
        assert all(restored.estimate(f'k{i}'.encode()) == sketch.estimate(f'k{i}'.encode()) for i in range(100))
        assert restored.to_bytes() == sketch.to_bytes()

    def test_restored_sketch_accepts_updates(self, sketch):
        """Test restored counters are writable."""
        restored = CountMinSketch.from_bytes(sketch.to_bytes())
        restored.update(b'k', 2)
        assert restored.estimate(b'k') == 2

    def test_bad_magic(self, sketch):
        """Test foreign bytes are rejected."""
        data = b'XXXX' + sketch.to_bytes()[4:]
        with pytest.raises(StorageError):
            CountMinSketch.from_bytes(data)

    def test_truncated(self, sketch):
        """Test truncated snapshots are rejected."""
        with pytest.raises(StorageError):
            CountMinSketch.from_bytes(sketch.to_bytes()[:-1])
