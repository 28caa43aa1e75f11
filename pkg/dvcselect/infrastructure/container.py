"""
Dependency injection container for infrastructure components.

This module provides factory functions that turn ``Settings`` into selection
configurations, models, engines and the experiment service.
"""

from functools import partial
from pathlib import Path
from typing import Optional

from .config.settings import Settings, get_settings
from .observability import (
    InstrumentedSelectionEngine,
    TracingConfig,
    init_tracing,
    shutdown_tracing,
    trace_experiment_cell,
)
from ..domain.models.network import Activation, MlpModel
from ..domain.models.selection import BayesOptConfig, ProbeConfig, SelectionConfig
from ..domain.models.sources import SourcePool
from ..domain.models.valuation import AblationMask
from ..domain.services.evaluation import FinalTrainingConfig
from ..domain.services.pool_synthesis import SynthesisSpec
from ..domain.services.selection_engine import AuditSink, SelectionEngine


def _combined_mask(settings: Settings, mask: Optional[AblationMask]) -> Optional[AblationMask]:
    names = set(settings.metrics.disabled_metrics)
    if mask is not None:
        names.update(mask.names())
    return AblationMask.from_names(sorted(names)) if names else None


def create_selection_config(
    settings: Optional[Settings] = None,
    budget: float = 0.2,
    seed: int = 0,
    mask: Optional[AblationMask] = None,
) -> SelectionConfig:
    """
    Create a SelectionConfig from settings.

    Args:
        settings: Optional settings override. Uses global settings if not provided.
        budget: Budget as a pool fraction (float) or a sample count (int)
        seed: Session seed
        mask: Metrics to disable on top of ``metrics.disabled_metrics``

    Returns:
        SelectionConfig for one selection session
    """
    if settings is None:
        settings = get_settings()

    weights = settings.weights
    return SelectionConfig(
        budget=budget,
        batch_size=settings.selection.batch_size,
        weight_update_frequency=weights.update_frequency,
        diversity_threshold=settings.selection.diversity_threshold,
        relax_step=settings.selection.relax_step,
        source_quota=settings.selection.source_quota,
        seed=seed,
        learning_rate=settings.model.learning_rate,
        cache_capacity=settings.cache.capacity,
        momentum_decay=settings.statistics.momentum_decay,
        norm_buffer_size=settings.statistics.norm_buffer_size,
        loss_window=settings.statistics.loss_window,
        loss_history_capacity=settings.statistics.loss_history_capacity,
        default_bandwidth=settings.statistics.default_bandwidth,
        bandwidth_floor=settings.statistics.bandwidth_floor,
        lsh_bits=settings.lsh.num_bits,
        lsh_tables=settings.lsh.num_tables,
        lsh_top_k=settings.lsh.top_k,
        lsh_seed=settings.lsh.seed,
        density_floor=settings.lsh.density_floor,
        quality_mode=settings.metrics.quality_mode,
        symmetric_scale=settings.metrics.symmetric_scale,
        mask=_combined_mask(settings, mask),
        exploration=settings.bandit.exploration,
        probability_floor=settings.bandit.probability_floor,
        bayes_opt=BayesOptConfig(
            length_scale=weights.length_scale,
            signal_variance=weights.signal_variance,
            jitter=weights.jitter,
            dirichlet_candidates=weights.dirichlet_candidates,
            local_perturbations=weights.local_perturbations,
            perturbation_scale=weights.perturbation_scale,
            quadratic_trend=weights.quadratic_trend,
            max_evaluations=weights.max_evaluations,
            patience=weights.patience,
            min_improvement=weights.min_improvement,
        ),
        probe=ProbeConfig(
            hidden_dims=tuple(settings.model.hidden_dims),
            activation=Activation(settings.model.activation),
            epochs=weights.probe_epochs,
            learning_rate=settings.training.learning_rate,
            batch_size=settings.training.batch_size,
            seed=seed,
        ),
    )


def create_model(pool: SourcePool, seed: int = 0, settings: Optional[Settings] = None) -> MlpModel:
    """A freshly initialised classifier sized for ``pool``."""
    if settings is None:
        settings = get_settings()

    dims = (pool.feature_dim, *settings.model.hidden_dims, pool.num_classes)
    return MlpModel.initialize(
        dims,
        activation=Activation(settings.model.activation),
        seed=settings.model.init_seed + seed,
    )


def create_selection_engine(
    pool: SourcePool,
    model: MlpModel,
    config: SelectionConfig,
    audit_sink: Optional[AuditSink] = None,
    settings: Optional[Settings] = None,
) -> SelectionEngine:
    """
    Create a selection engine; rounds are traced when tracing is enabled.

    Args:
        pool: Source pool
        model: Model the session updates in place
        config: Session configuration
        audit_sink: Optional per-valuation record consumer
        settings: Optional settings override. Uses global settings if not provided.

    Returns:
        SelectionEngine (InstrumentedSelectionEngine when tracing is on)
    """
    if settings is None:
        settings = get_settings()

    engine_cls = (
        InstrumentedSelectionEngine if settings.observability.tracing_enabled else SelectionEngine
    )
    return engine_cls(pool, model, config, audit_sink)


def create_synthesis_spec(settings: Optional[Settings] = None, seed: int = 0) -> SynthesisSpec:
    if settings is None:
        settings = get_settings()

    synth = settings.synthesis
    return SynthesisSpec(
        num_classes=synth.num_classes,
        num_features=synth.num_features,
        num_sources=synth.num_sources,
        pool_size=synth.pool_size,
        validation_size=synth.validation_size,
        test_size=synth.test_size,
        clusters_per_class=synth.clusters_per_class,
        separation=synth.separation,
        flip_rates=tuple(synth.flip_rates),
        noise_levels=tuple(synth.noise_levels) if synth.noise_levels is not None else None,
        duplication_factors=(
            tuple(synth.duplication_factors) if synth.duplication_factors is not None else None
        ),
        seed=seed,
    )


def create_final_training(settings: Optional[Settings] = None) -> FinalTrainingConfig:
    if settings is None:
        settings = get_settings()

    return FinalTrainingConfig(
        hidden_dims=tuple(settings.model.hidden_dims),
        activation=Activation(settings.model.activation),
        epochs=settings.training.epochs,
        learning_rate=settings.training.learning_rate,
        batch_size=settings.training.batch_size,
    )


def _load_tabular_dataset(dataset, seed: int) -> SourcePool:
    from .parsers.tabular_parser import TabularSchema, load_tabular

    schema = TabularSchema(
        label_column=dataset.label_column,
        source_column=dataset.source_column,
        num_sources=dataset.num_sources,
        validation_fraction=dataset.validation_fraction,
        test_fraction=dataset.test_fraction,
        seed=seed,
    )
    return load_tabular(Path(dataset.path), schema)


def create_report_store(settings: Optional[Settings] = None, out_dir: Optional[str] = None):
    """FileReportStore rooted at ``out_dir`` or ``output.data_directory``."""
    from .storage.file_repositories import FileReportStore

    if settings is None:
        settings = get_settings()

    return FileReportStore(out_dir or settings.output.data_directory)


def setup_observability(settings: Optional[Settings] = None) -> None:
    """
    Setup observability (tracing) based on configuration.

    Args:
        settings: Optional settings override. Uses global settings if not provided.
    """
    if settings is None:
        settings = get_settings()

    if settings.observability.tracing_enabled:
        init_tracing(TracingConfig.from_settings(settings.observability))


def shutdown_observability() -> None:
    shutdown_tracing()


def create_experiment_service(settings: Optional[Settings] = None):
    """
    Create a fully configured ExperimentService instance.

    Args:
        settings: Optional settings override. Uses global settings if not provided.

    Returns:
        Configured ExperimentService instance
    """
    from ..application.services.experiment_service import ExperimentService

    if settings is None:
        settings = get_settings()

    # Setup observability
    setup_observability(settings)

    def config_factory(budget: float, seed: int, mask: Optional[AblationMask]) -> SelectionConfig:
        return create_selection_config(settings, budget, seed, mask)

    def model_factory(pool: SourcePool, seed: int) -> MlpModel:
        return create_model(pool, seed, settings)

    kwargs = {}
    if settings.observability.tracing_enabled:
        kwargs["cell_context"] = trace_experiment_cell

    return ExperimentService(
        config_factory=config_factory,
        model_factory=model_factory,
        engine_factory=partial(create_selection_engine, settings=settings),
        final_training=create_final_training(settings),
        synthesis=create_synthesis_spec(settings),
        tabular_loader=_load_tabular_dataset,
        **kwargs,
    )
