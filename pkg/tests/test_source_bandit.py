"""
Tests for the per-source UCB bandit.
"""

import math

import numpy as np
import pytest

from dvcselect.domain.models.bandit import BanditState
from dvcselect.domain.services.source_bandit import (
    analytic_regret_bound,
    regret_ledger,
    select_arm,
    simulate_bernoulli,
    source_probabilities,
    ucb_score,
    update_reward,
)
from dvcselect.shared.exceptions import ConfigurationError, UnsupportedOperationError


class TestBanditState:
    """Test bandit construction."""

    def test_no_arms_raises(self):
        """Test that a bandit needs at least one arm."""
        with pytest.raises(ConfigurationError):
            BanditState.create(0)

    def test_negative_exploration_raises(self):
        """Test that the exploration coefficient cannot be negative."""
        with pytest.raises(ConfigurationError):
            BanditState.create(2, exploration=-1.0)

    def test_epsilon_is_floor_over_k(self):
        """Test the per-arm probability floor."""
        assert BanditState.create(4, probability_floor=0.02).epsilon == pytest.approx(0.005)


class TestSourceProbabilities:
    """Test the UCB-to-probability mapping."""

    def setup_method(self):
        """Set up test fixtures."""
        self.state = BanditState.create(3)

    def test_all_untried_is_uniform(self):
        """Test that a fresh bandit samples sources uniformly."""
        np.testing.assert_allclose(source_probabilities(self.state), [1 / 3] * 3)

    def test_untried_arms_share_the_remainder(self):
        """Test that tried arms get the floor while untried arms split the rest."""
        update_reward(self.state, 0, 1.0)
        probs = source_probabilities(self.state)
        eps = self.state.epsilon
        assert probs[0] == pytest.approx(eps)
        assert probs[1] == pytest.approx((1 - eps) / 2)
        assert probs.sum() == pytest.approx(1.0)

    def test_tried_arms_form_floored_distribution(self):
        """Test that probabilities sum to one, respect the floor and favour the best arm."""
        for arm, reward in [(0, 0.9), (1, 0.1), (2, 0.5), (0, 0.8), (1, 0.2)]:
            update_reward(self.state, arm, reward)
        probs = source_probabilities(self.state)
        assert probs.sum() == pytest.approx(1.0)
        assert np.all(probs >= self.state.epsilon - 1e-15)
        scores = [ucb_score(self.state, i) for i in range(3)]
        assert int(np.argmax(probs)) == int(np.argmax(scores))
        assert probs[int(np.argmin(scores))] == pytest.approx(self.state.epsilon)

    def test_equal_scores_give_uniform(self):
        """Test that identical arms are sampled uniformly."""
        for arm in range(3):
            update_reward(self.state, arm, 0.5)
        np.testing.assert_allclose(source_probabilities(self.state), [1 / 3] * 3)


class TestRewardsAndArms:
    """Test reward updates and arm choice."""

    def setup_method(self):
        """Set up test fixtures."""
        self.state = BanditState.create(2)

    def test_untried_arm_scores_infinity(self):
        """Test that an unpulled arm has an infinite UCB score."""
        assert ucb_score(self.state, 1) == math.inf

    def test_ucb_score_formula(self):
        """Test mean + c sqrt(2 ln t / n)."""
        update_reward(self.state, 0, 1.0)
        update_reward(self.state, 1, 0.0)
        update_reward(self.state, 0, 0.0)
        expected = 0.5 + math.sqrt(2 * math.log(3) / 2)
        assert ucb_score(self.state, 0) == pytest.approx(expected)

    def test_out_of_range_reward_is_clamped(self):
        """Test that rewards outside [0, 1] are clamped and counted."""
        update_reward(self.state, 0, 1.5)
        update_reward(self.state, 1, -0.3)
        assert self.state.arms[0].mean == 1.0
        assert self.state.arms[1].mean == 0.0
        assert self.state.clamp_warnings == 2

    def test_non_finite_reward_raises(self):
        """Test that NaN rewards are rejected."""
        with pytest.raises(ValueError):
            update_reward(self.state, 0, float("nan"))

    def test_untried_arms_are_selected_first(self):
        """Test that the lowest-index untried arm is pulled first."""
        assert select_arm(self.state) == 0
        update_reward(self.state, 0, 1.0)
        assert select_arm(self.state) == 1


class TestRegret:
    """Test regret accounting against known means."""

    def test_analytic_bound_value(self):
        """Test the bound for means (0.9, 0.8) at T = 10^4."""
        assert analytic_regret_bound([0.9, 0.8], 10_000) == pytest.approx(737.3, abs=0.1)

    def test_bound_is_zero_without_gaps(self):
        """Test that identical arms have zero bound."""
        assert analytic_regret_bound([0.5, 0.5], 1000) == 0.0

    def test_ledger_needs_true_means(self):
        """Test that regret is only defined in simulation."""
        state = BanditState.create(2)
        with pytest.raises(UnsupportedOperationError):
            regret_ledger(state, None)
        with pytest.raises(UnsupportedOperationError):
            regret_ledger(state, [0.5])

    def test_ledger_accumulates_gaps(self):
        """Test cumulative pseudo-regret of a fixed pull sequence."""
        state = BanditState.create(2)
        state.pull_history.extend([0, 1, 1, 0])
        trace = regret_ledger(state, [0.9, 0.8])
        np.testing.assert_allclose(trace.cumulative, [0.0, 0.1, 0.2, 0.2])
        assert trace.final == pytest.approx(0.2)

    def test_simulation_is_deterministic(self):
        """Test that a fixed seed reproduces the regret trace."""
        first = simulate_bernoulli([0.9, 0.8], 500, seed=3)
        second = simulate_bernoulli([0.9, 0.8], 500, seed=3)
        assert first.cumulative == second.cumulative
        assert len(first.cumulative) == 500

    def test_simulated_regret_within_bound(self):
        """Test that one run stays below the analytic bound."""
        trace = simulate_bernoulli([0.9, 0.8], 2_000, seed=0)
        assert trace.final <= trace.analytic_bound

    @pytest.mark.slow
    def test_regret_is_sublinear_over_seeds(self):
        """Test mean regret over 20 seeds against the bound and its growth rate."""
        horizons = [2_000, 20_000]
        means = []
        for horizon in horizons:
            finals = [simulate_bernoulli([0.9, 0.8], horizon, seed=s).final for s in range(20)]
            means.append(float(np.mean(finals)))
            assert means[-1] <= analytic_regret_bound([0.9, 0.8], horizon)
        slope = math.log(means[1] / means[0]) / math.log(horizons[1] / horizons[0])
        assert slope < 1.0
