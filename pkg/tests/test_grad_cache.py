"""
Tests for the version-keyed gradient cache.
"""

import time

import numpy as np
import pytest

from dvcselect.domain.models.network import LossKind, MlpModel, OutputKind
from dvcselect.domain.services.grad_cache import GradCache
from dvcselect.domain.services.mlp_core import backward, forward, sgd_step
from dvcselect.shared.exceptions import ConfigurationError


class TestGradCache:
    """Test GradCache lookups, eviction and invalidation."""

    def setup_method(self):
        """Set up test fixtures."""
        self.model = MlpModel.initialize((4, 8, 3), seed=0)
        self.loss = LossKind.cross_entropy()
        rng = np.random.default_rng(1)
        self.samples = [(rng.normal(size=4), int(rng.integers(0, 3))) for _ in range(10)]

    def test_invalid_capacity_raises(self):
        """Test that a zero capacity is rejected."""
        with pytest.raises(ConfigurationError):
            GradCache(0)

    def test_cached_gradients_equal_direct_computation(self):
        """Test that cached and uncached gradients are bit-identical."""
        cache = GradCache(16)
        for x, y in self.samples:
            direct = backward(self.model, forward(self.model, x, y, self.loss), y, self.loss)
            first = cache.get_or_compute(self.model, x, y, self.loss)
            second = cache.get_or_compute(self.model, x, y, self.loss)
            np.testing.assert_array_equal(first.param_grad_flat, direct.param_grad_flat)
            np.testing.assert_array_equal(second.param_grad_flat, direct.param_grad_flat)
            for a, b in zip(second.hidden_grads, direct.hidden_grads):
                np.testing.assert_array_equal(a, b)

    def test_hit_and_miss_counters(self):
        """Test that a repeated lookup is a hit."""
        cache = GradCache(16)
        x, y = self.samples[0]
        cache.get_or_compute(self.model, x, y, self.loss)
        cache.get_or_compute(self.model, x, y, self.loss)
        stats = cache.stats()
        assert stats.hits == 1
        assert stats.misses == 1
        assert stats.hit_rate == pytest.approx(0.5)
        assert stats.occupancy == 1

    def test_model_update_invalidates_entries(self):
        """Test that a new model version misses and yields fresh gradients."""
        cache = GradCache(16)
        x, y = self.samples[0]
        old = cache.get_or_compute(self.model, x, y, self.loss)
        sgd_step(self.model, [(x, y)], 0.5, self.loss)
        new = cache.get_or_compute(self.model, x, y, self.loss)
        assert cache.stats().misses == 2
        assert new.model_version == self.model.version
        assert not np.array_equal(old.param_grad_flat, new.param_grad_flat)

    def test_lru_eviction(self):
        """Test that the least recently used entry is evicted at capacity."""
        cache = GradCache(2)
        (x0, y0), (x1, y1), (x2, y2) = self.samples[:3]
        cache.get_or_compute(self.model, x0, y0, self.loss)
        cache.get_or_compute(self.model, x1, y1, self.loss)
        cache.get_or_compute(self.model, x0, y0, self.loss)  # refresh x0
        cache.get_or_compute(self.model, x2, y2, self.loss)  # evicts x1
        assert len(cache) == 2
        cache.get_or_compute(self.model, x0, y0, self.loss)
        assert cache.stats().hits == 2
        cache.get_or_compute(self.model, x1, y1, self.loss)
        assert cache.stats().misses == 4

    def test_same_features_different_label_are_distinct(self):
        """Test that the label is part of the cache key."""
        cache = GradCache(4)
        x, _ = self.samples[0]
        a = cache.get_or_compute(self.model, x, 0, self.loss)
        b = cache.get_or_compute(self.model, x, 1, self.loss)
        assert cache.stats().misses == 2
        assert not np.array_equal(a.param_grad_flat, b.param_grad_flat)

    def test_loss_is_part_of_the_cache_key(self):
        """Test that the same sample under another loss misses at the same model version."""
        model = MlpModel.initialize((4, 8, 4), output_kind=OutputKind.IDENTITY, seed=0)
        x = self.samples[0][0]
        y = np.array([0.3, -0.2])
        tight = LossKind.gaussian_nll(variance_floor=1e-6)
        loose = LossKind.gaussian_nll(variance_floor=10.0)
        cache = GradCache(4)

        cache.get_or_compute(model, x, y, tight)
        cached = cache.get_or_compute(model, x, y, loose)
        direct = backward(model, forward(model, x, y, loose), y, loose)

        assert cache.stats().misses == 2
        assert len(cache) == 2
        np.testing.assert_array_equal(cached.param_grad_flat, direct.param_grad_flat)

    def test_reset_clears_entries_and_counters(self):
        """Test that reset empties the cache."""
        cache = GradCache(4)
        x, y = self.samples[0]
        cache.get_or_compute(self.model, x, y, self.loss)
        cache.reset()
        assert len(cache) == 0
        assert cache.stats().misses == 0

    def test_failed_computation_leaves_no_entry(self):
        """Test that an invalid label raises without inserting anything."""
        cache = GradCache(4)
        x, _ = self.samples[0]
        with pytest.raises(Exception):
            cache.get_or_compute(self.model, x, 7, self.loss)
        assert len(cache) == 0

    @pytest.mark.slow
    def test_second_pass_is_faster(self):
        """Test that re-valuing 512 candidates under a frozen model is at least 5x faster."""
        model = MlpModel.initialize((32, 64, 32, 4), seed=0)
        rng = np.random.default_rng(2)
        batch = [(rng.normal(size=32), int(rng.integers(0, 4))) for _ in range(512)]
        cache = GradCache(1024)

        started = time.perf_counter()
        for x, y in batch:
            cache.get_or_compute(model, x, y, self.loss)
        first = time.perf_counter() - started

        started = time.perf_counter()
        for x, y in batch:
            cache.get_or_compute(model, x, y, self.loss)
        second = time.perf_counter() - started

        assert first / second >= 5.0
