"""
Tests for infrastructure container and dependency injection.
"""

import tempfile
from pathlib import Path
from unittest.mock import patch

import pytest

from dvcselect.domain.models.network import Activation
from dvcselect.domain.models.valuation import AblationMask, MetricName
from dvcselect.domain.services.pool_synthesis import SynthesisSpec, synthesize_pool
from dvcselect.domain.services.selection_engine import SelectionEngine
from dvcselect.infrastructure.config.settings import Settings
from dvcselect.infrastructure.observability import InstrumentedSelectionEngine


def _pool():
    return synthesize_pool(SynthesisSpec(
        num_classes=3, num_features=4, num_sources=2, pool_size=60,
        validation_size=10, test_size=10, flip_rates=(0.0, 0.1), seed=0,
    ))


class TestSetupObservability:
    """Test setup_observability function."""

    def test_setup_observability_disabled(self):
        """Test that observability is not set up when disabled."""
        from dvcselect.infrastructure.container import setup_observability

        settings = Settings.default()
        settings.observability.tracing_enabled = False

        with patch('dvcselect.infrastructure.container.init_tracing') as mock_init:
            setup_observability(settings)

            mock_init.assert_not_called()

    def test_setup_observability_enabled(self):
        """Test that observability is set up when enabled."""
        from dvcselect.infrastructure.container import setup_observability

        settings = Settings.default()
        settings.observability.tracing_enabled = True
        settings.observability.service_name = "test-service"

        with patch('dvcselect.infrastructure.container.init_tracing') as mock_init:
            setup_observability(settings)

            mock_init.assert_called_once()
            call_args = mock_init.call_args[0][0]
            assert call_args.service_name == "test-service"
            assert call_args.enabled is True


class TestSelectionConfigFactory:
    """Test mapping settings onto a selection configuration."""

    def test_settings_flow_into_config(self):
        """Test that every section reaches the session configuration."""
        from dvcselect.infrastructure.container import create_selection_config

        settings = Settings.default()
        settings.selection.batch_size = 4
        settings.lsh.num_bits = 6
        settings.weights.max_evaluations = 7
        settings.weights.probe_epochs = 2
        settings.model.hidden_dims = [16]

        config = create_selection_config(settings, budget=0.3, seed=9)
        assert config.budget == 0.3
        assert config.seed == 9
        assert config.batch_size == 4
        assert config.lsh_bits == 6
        assert config.bayes_opt.max_evaluations == 7
        assert config.probe.epochs == 2
        assert config.probe.hidden_dims == (16,)
        assert config.probe.seed == 9
        assert config.mask is None

    def test_masks_are_combined(self):
        """Test that configured and requested masks are merged."""
        from dvcselect.infrastructure.container import create_selection_config

        settings = Settings.default()
        settings.metrics.disabled_metrics = ["stability"]
        mask = AblationMask(frozenset({MetricName.QUALITY}))

        config = create_selection_config(settings, mask=mask)
        assert config.mask.disabled == {MetricName.QUALITY, MetricName.STABILITY}


class TestContainerFactories:
    """Test container factory functions."""

    def test_create_model_matches_pool(self):
        """Test that the model is sized for the pool and seeded."""
        from dvcselect.infrastructure.container import create_model

        settings = Settings.default()
        settings.model.hidden_dims = [8, 4]
        settings.model.activation = "tanh"
        model = create_model(_pool(), seed=1, settings=settings)
        assert model.layer_dims == (4, 8, 4, 3)
        assert model.activation is Activation.TANH

    def test_engine_is_instrumented_only_when_tracing(self):
        """Test that the traced engine is used only with tracing enabled."""
        from dvcselect.infrastructure.container import (
            create_model,
            create_selection_config,
            create_selection_engine,
        )

        settings = Settings.default()
        pool = _pool()
        config = create_selection_config(settings, budget=20)

        plain = create_selection_engine(pool, create_model(pool, 0, settings), config, settings=settings)
        assert type(plain) is SelectionEngine

        settings.observability.tracing_enabled = True
        traced = create_selection_engine(pool, create_model(pool, 0, settings), config, settings=settings)
        assert isinstance(traced, InstrumentedSelectionEngine)

    def test_create_synthesis_spec(self):
        """Test that synthesis settings become a generator spec."""
        from dvcselect.infrastructure.container import create_synthesis_spec

        settings = Settings.default()
        settings.synthesis.num_sources = 2
        settings.synthesis.flip_rates = [0.0, 0.3]
        spec = create_synthesis_spec(settings, seed=5)
        assert spec.flip_rates == (0.0, 0.3)
        assert spec.seed == 5

    def test_create_report_store(self):
        """Test that the report store is rooted at the output directory."""
        from dvcselect.infrastructure.container import create_report_store

        with tempfile.TemporaryDirectory() as temp_dir:
            settings = Settings.default()
            settings.output.data_directory = temp_dir
            store = create_report_store(settings)
            assert store.storage_dir == Path(temp_dir)

    def test_create_experiment_service(self):
        """Test creating the experiment service."""
        from dvcselect.application.services.experiment_service import ExperimentService
        from dvcselect.infrastructure.container import create_experiment_service

        settings = Settings.default()
        settings.observability.tracing_enabled = False
        with patch('dvcselect.infrastructure.container.init_tracing') as mock_init:
            service = create_experiment_service(settings)
            mock_init.assert_not_called()
        assert isinstance(service, ExperimentService)


class TestShutdown:
    """Test shutdown functionality."""

    def test_shutdown_graceful(self):
        """Test that shutdown works even without tracing."""
        from dvcselect.infrastructure.container import shutdown_observability

        with patch('dvcselect.infrastructure.container.shutdown_tracing') as mock_shutdown:
            shutdown_observability()
            mock_shutdown.assert_called_once()


@pytest.mark.parametrize("budget", [0.2, 12])
def test_selection_config_accepts_fraction_or_count(budget):
    """Test that budgets may be fractions or counts."""
    from dvcselect.infrastructure.container import create_selection_config

    assert create_selection_config(Settings.default(), budget=budget).resolve_budget(60) == 12
