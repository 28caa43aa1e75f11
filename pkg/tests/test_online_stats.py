"""
Tests for streaming reference statistics.
"""

import numpy as np
import pytest

from dvcselect.domain.models.network import LayerGradients, LossKind, MlpModel
from dvcselect.domain.services.mlp_core import backward, forward
from dvcselect.domain.services.online_stats import (
    GradientMomentum,
    LossHistory,
    OnlineStatistics,
    WelfordAccumulator,
)
from dvcselect.shared.exceptions import ColdStartError, ValidationError


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


class TestWelfordAccumulator:
    """Test the single-pass mean/variance accumulator."""

    def test_matches_two_pass_with_large_shift(self):
        """Test streamed moments against two-pass results on data with a 1e8 shift."""
        rng = np.random.default_rng(0)
        values = rng.normal(size=10_000)
        values[5_000:] += 1e8
        acc = WelfordAccumulator()
        for value in values:
            acc.update(value)
        assert _rel(float(acc.mean[0]), float(np.mean(values))) < 1e-10
        assert _rel(float(acc.variance()[0]), float(np.var(values, ddof=1))) < 1e-10

    def test_vector_stream(self):
        """Test per-coordinate moments of a vector stream."""
        rng = np.random.default_rng(1)
        values = rng.normal(3.0, 2.0, size=(500, 4))
        acc = WelfordAccumulator()
        for row in values:
            acc.update(row)
        np.testing.assert_allclose(acc.mean, values.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(acc.variance(), values.var(axis=0, ddof=1), rtol=1e-10)

    def test_single_observation_has_zero_variance(self):
        """Test that one observation gives zero variance."""
        acc = WelfordAccumulator()
        acc.update([1.0, 2.0])
        np.testing.assert_array_equal(acc.variance(), [0.0, 0.0])

    def test_empty_accumulator_raises(self):
        """Test that variance before any observation raises ColdStartError."""
        with pytest.raises(ColdStartError):
            WelfordAccumulator().variance()

    def test_shape_change_raises(self):
        """Test that a change of observation shape is rejected."""
        acc = WelfordAccumulator()
        acc.update([1.0, 2.0])
        with pytest.raises(ValidationError):
            acc.update([1.0, 2.0, 3.0])


class TestGradientMomentum:
    """Test gradient EMAs."""

    def test_first_update_seeds_the_average(self):
        """Test that the first gradient is taken as-is."""
        momentum = GradientMomentum(1, decay=0.9)
        momentum.update(np.array([1.0, 2.0]), [np.array([3.0])])
        np.testing.assert_array_equal(momentum.flat_momentum, [1.0, 2.0])
        np.testing.assert_array_equal(momentum.layer(1), [3.0])

    def test_exponential_average(self):
        """Test m <- beta m + (1 - beta) g."""
        momentum = GradientMomentum(1, decay=0.9)
        momentum.update(np.array([1.0]), [np.array([0.0])])
        momentum.update(np.array([0.0]), [np.array([10.0])])
        assert momentum.flat_momentum[0] == pytest.approx(0.9)
        assert momentum.layer(1)[0] == pytest.approx(1.0)

    def test_decay_outside_unit_interval_raises(self):
        """Test that decay must lie strictly inside (0, 1)."""
        with pytest.raises(ValidationError):
            GradientMomentum(1, decay=1.0)


class TestLossHistory:
    """Test bounded per-sample loss rings."""

    def setup_method(self):
        """Set up test fixtures."""
        self.history = LossHistory(window=3)

    def test_variance_needs_two_entries(self):
        """Test that one entry yields no variance."""
        self.history.record_loss("a", 0, 1.0)
        assert self.history.loss_variance("a") is None
        assert self.history.loss_variance("missing") is None

    def test_population_variance(self):
        """Test that the variance is the population variance of the ring."""
        self.history.record_loss("a", 0, 1.0)
        self.history.record_loss("a", 1, 3.0)
        assert self.history.loss_variance("a") == pytest.approx(1.0)

    def test_ring_is_bounded(self):
        """Test that only the last ``window`` entries are kept."""
        for version, value in enumerate([100.0, 1.0, 1.0, 1.0]):
            self.history.record_loss("a", version, value)
        assert [loss for _, loss in self.history.entries("a")] == [1.0, 1.0, 1.0]
        assert self.history.loss_variance("a") == pytest.approx(0.0)

    def test_older_version_is_ignored(self):
        """Test that an entry from an older model state is dropped."""
        self.history.record_loss("a", 5, 1.0)
        self.history.record_loss("a", 3, 9.0)
        assert self.history.entries("a") == [(5, 1.0)]

    def test_same_version_replaces_value(self):
        """Test that re-recording under the same version keeps the latest loss."""
        self.history.record_loss("a", 2, 1.0)
        self.history.record_loss("a", 2, 4.0)
        assert self.history.entries("a") == [(2, 4.0)]

    def test_running_max_variance(self):
        """Test that the running maximum tracks the largest ring variance."""
        self.history.record_loss("a", 0, 0.0)
        self.history.record_loss("a", 1, 4.0)
        self.history.record_loss("b", 0, 1.0)
        self.history.record_loss("b", 1, 1.0)
        assert self.history.running_max_variance == pytest.approx(4.0)

    def test_tracked_samples_are_bounded(self):
        """Test that a long stream of distinct samples never exceeds max_tracked rings."""
        history = LossHistory(window=3, max_tracked=50)
        for version in range(4):
            for i in range(1000):
                history.record_loss(f"s{i}", version, float(i))
        assert len(history) == 50
        assert history.evictions == 4000 - 50
        assert history.entries("s999") == [(3, 999.0)]
        assert history.entries("s0") == []

    def test_least_recently_updated_ring_is_evicted(self):
        """Test that updating a ring protects it from the next eviction."""
        history = LossHistory(window=3, max_tracked=2)
        history.record_loss("a", 0, 1.0)
        history.record_loss("b", 0, 2.0)
        history.record_loss("a", 1, 3.0)
        history.record_loss("c", 0, 4.0)
        assert history.entries("a") == [(0, 1.0), (1, 3.0)]
        assert history.entries("b") == []
        assert len(history) == 2

    def test_invalid_capacity_raises(self):
        """Test that max_tracked must be positive."""
        with pytest.raises(ValidationError):
            LossHistory(window=3, max_tracked=0)


class TestOnlineStatistics:
    """Test the aggregate statistics object."""

    def setup_method(self):
        """Set up test fixtures."""
        self.model = MlpModel.initialize((3, 5, 2), seed=0)
        self.loss = LossKind.cross_entropy()
        self.stats = OnlineStatistics([5, 2])

    def _observe(self, x, y):
        trace = forward(self.model, x, y, self.loss)
        return self.stats.update(trace, backward(self.model, trace, y, self.loss))

    def test_cold_start(self):
        """Test defaults before any observation."""
        assert self.stats.bandwidth(1) == pytest.approx(1.0)
        with pytest.raises(ColdStartError):
            self.stats.median_norm(1)

    def test_update_feeds_every_layer(self):
        """Test that one observation reaches each layer and the momentum."""
        assert self._observe(np.ones(3), 0)
        assert self.stats.layer(1).count == 1
        assert self.stats.layer(2).count == 1
        assert self.stats.momentum.warm

    def test_median_norm(self):
        """Test that the median is taken over recorded activation norms."""
        rng = np.random.default_rng(0)
        for _ in range(5):
            self._observe(rng.normal(size=3), 1)
        norms = list(self.stats.layer(2).norm_buffer)
        assert self.stats.median_norm(2) == pytest.approx(float(np.median(norms)))

    def test_bandwidth_is_floored(self):
        """Test that identical observations give the floor bandwidth."""
        for _ in range(3):
            self._observe(np.ones(3), 0)
        assert self.stats.bandwidth(1) == pytest.approx(self.stats.bandwidth_floor)

    def test_non_finite_observation_is_skipped(self):
        """Test that a non-finite gradient is counted and ignored."""
        trace = forward(self.model, np.ones(3), 0, self.loss)
        grads = backward(self.model, trace, 0, self.loss)
        broken = LayerGradients(
            grads.hidden_grads, grads.output_grad,
            np.full_like(grads.param_grad_flat, np.nan), grads.model_version,
        )
        assert not self.stats.update(trace, broken)
        assert self.stats.skipped_observations == 1
        assert self.stats.layer(1).count == 0

    def test_layer_index_out_of_range_raises(self):
        """Test that metric layers are addressed as 1..L."""
        with pytest.raises(ValidationError):
            self.stats.layer(0)
