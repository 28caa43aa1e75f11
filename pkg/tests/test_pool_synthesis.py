"""
Tests for synthetic multi-source pools.
"""

import numpy as np
import pytest

from dvcselect.domain.models.sources import Split
from dvcselect.domain.services.pool_synthesis import (
    SynthesisSpec,
    disagreement_rate,
    flip_labels,
    synthesize_pool,
)
from dvcselect.shared.exceptions import ConfigurationError


class TestFlipLabels:
    """Test label corruption."""

    def setup_method(self):
        """Set up test fixtures."""
        self.rng = np.random.default_rng(0)
        self.labels = self.rng.integers(0, 4, size=100_000)

    def test_zero_rate_is_identity(self):
        """Test that flip rate 0 leaves every label unchanged."""
        np.testing.assert_array_equal(flip_labels(self.labels, 0.0, 4, self.rng), self.labels)

    def test_rate_matches_disagreement(self):
        """Test that rate 0.4 gives 0.4 disagreement within 0.01."""
        flipped = flip_labels(self.labels, 0.4, 4, self.rng)
        assert np.mean(flipped != self.labels) == pytest.approx(0.4, abs=0.01)

    def test_flipped_labels_stay_in_range(self):
        """Test that corrupted labels are valid classes."""
        flipped = flip_labels(self.labels, 1.0, 4, self.rng)
        assert np.all(flipped != self.labels)
        assert flipped.min() >= 0 and flipped.max() < 4


class TestSynthesizePool:
    """Test pool generation."""

    def setup_method(self):
        """Set up test fixtures."""
        self.spec = SynthesisSpec(
            num_classes=3, num_features=5, num_sources=3, pool_size=6000,
            validation_size=100, test_size=200, flip_rates=(0.0, 0.2, 0.4), seed=1,
        )

    def test_pool_shape(self):
        """Test sizes, splits and source attribution."""
        pool = synthesize_pool(self.spec)
        assert pool.num_sources == 3
        assert pool.train_size == 6000
        assert len(pool.validation) == 100
        assert len(pool.test) == 200
        assert pool.feature_dim == 5
        assert all(s.split is Split.VALIDATION for s in pool.validation)

    def test_disagreement_follows_flip_rates(self):
        """Test that each source's observed corruption matches its flip rate."""
        pool = synthesize_pool(self.spec)
        rates = [disagreement_rate(source.samples) for source in pool.sources]
        assert rates[0] == 0.0
        assert rates[1] == pytest.approx(0.2, abs=0.05)
        assert rates[2] == pytest.approx(0.4, abs=0.05)

    def test_validation_and_test_are_clean(self):
        """Test that held-out splits carry ground-truth labels."""
        pool = synthesize_pool(self.spec)
        assert disagreement_rate(pool.validation) == 0.0
        assert disagreement_rate(pool.test) == 0.0

    def test_same_seed_same_pool(self):
        """Test that synthesis is deterministic."""
        first = synthesize_pool(self.spec)
        second = synthesize_pool(self.spec)
        assert [s.digest for s in first.train_samples] == [s.digest for s in second.train_samples]

    def test_duplication_doubles_a_source(self):
        """Test that duplication factor 2 repeats every sample of the source."""
        spec = SynthesisSpec(
            num_classes=2, num_features=3, num_sources=2, pool_size=100,
            validation_size=10, test_size=10, flip_rates=(0.0, 0.0),
            duplication_factors=(1, 2), seed=0,
        )
        pool = synthesize_pool(spec)
        assert len(pool.sources[0]) == 50
        assert len(pool.sources[1]) == 100
        digests = [s.digest for s in pool.sources[1].samples]
        assert len(set(digests)) == 50

    def test_wrong_number_of_flip_rates_raises(self):
        """Test that per-source settings must cover every source."""
        with pytest.raises(ConfigurationError):
            synthesize_pool(SynthesisSpec(num_sources=3, flip_rates=(0.0, 0.1)))

    def test_infeasible_flip_rate_raises(self):
        """Test that flip rates outside [0, 1] are rejected."""
        with pytest.raises(ConfigurationError):
            synthesize_pool(SynthesisSpec(num_sources=2, flip_rates=(0.0, 1.5)))

    def test_pool_smaller_than_sources_raises(self):
        """Test that every source needs at least one sample."""
        with pytest.raises(ConfigurationError):
            synthesize_pool(SynthesisSpec(num_sources=2, flip_rates=(0.0, 0.0), pool_size=1))
