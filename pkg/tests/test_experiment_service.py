"""
End-to-end checks of the experiment service on the default synthetic pool.

These run the full selection stack at its default scale and are marked slow.
"""

import pytest

from dvcselect.application.dto import AblationSpec, ExperimentSpec, ScalingSpec
from dvcselect.infrastructure.config.settings import Settings
from dvcselect.infrastructure.container import create_experiment_service

SEEDS = [0, 1, 2, 3, 4]
SINGLE_METRIC_VARIANTS = [
    "no_quality", "no_relevance", "no_diversity",
    "no_gradient_impact", "no_uncertainty", "no_stability",
]


def _mean_accuracy(result, method: str, budget: float) -> float:
    row = next(r for r in result.rows if r.method == method and r.budget == budget)
    assert row.failures == 0
    return row.accuracy_mean


@pytest.mark.slow
class TestSelectionQuality:
    """DVC against the random and uncertainty baselines."""

    def setup_method(self):
        """Set up test fixtures."""
        self.service = create_experiment_service(Settings.default())

    def test_dvc_beats_baselines_at_twenty_percent(self):
        """Test a 2-point margin over Random and 1 point over Uncertainty over 5 seeds."""
        spec = ExperimentSpec(
            budgets=[0.2], methods=["dvc", "random", "uncertainty"], seeds=SEEDS,
        )
        result = self.service.run_experiment(spec)

        dvc = _mean_accuracy(result, "dvc", 0.2)
        assert dvc - _mean_accuracy(result, "random", 0.2) >= 0.02
        assert dvc - _mean_accuracy(result, "uncertainty", 0.2) >= 0.01


@pytest.mark.slow
class TestAblationDirection:
    """Disabling metrics should not help."""

    def test_no_single_metric_removal_helps(self):
        """Test that no single-metric ablation gains more than 0.3 points over full."""
        service = create_experiment_service(Settings.default())
        spec = AblationSpec(
            budget=0.2, variants=["full", *SINGLE_METRIC_VARIANTS], seeds=SEEDS,
        )
        result = service.run_ablation(spec)

        rows = {row.variant: row for row in result.rows}
        assert all(row.failures == 0 for row in result.rows)
        for variant in SINGLE_METRIC_VARIANTS:
            assert rows[variant].delta_vs_full <= 0.003, variant
        best = max(row.accuracy_mean for row in result.rows)
        assert best - rows["full"].accuracy_mean <= 0.003


@pytest.mark.slow
class TestScaling:
    """Select time and end-to-end speedup across pool sizes."""

    def test_select_time_is_sublinear_with_speedup_and_proximity(self):
        """Test slope < 1, speedup >= 2x and the proximity rule at 10% budget."""
        service = create_experiment_service(Settings.default())
        result = service.scaling_sweep(
            ScalingSpec(pool_sizes=[20_000, 40_000, 80_000], budget=0.1, seeds=[0])
        )

        assert [row.pool_size for row in result.rows] == [20_000, 40_000, 80_000]
        assert result.select_time_slope < 1.0
        for row in result.rows:
            assert row.speedup >= 2.0, row.pool_size
            assert row.proximity_pass, row.pool_size
