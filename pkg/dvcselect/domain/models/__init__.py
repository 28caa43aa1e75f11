"""
Domain models package.
"""

from .bandit import BanditState, RegretTrace, UcbArm
from .network import (
    Activation, ForwardTrace, LayerGradients, LossKind, LossType, MlpModel, OutputKind,
)
from .selection import (
    BayesOptConfig, ProbeConfig, RoundRecord, ScoredCandidate, SelectionConfig, SelectionReport,
)
from .sources import (
    CorruptionSpec, DataSource, Sample, SourcePool, Split, sample_digest, stack_samples,
)
from .valuation import (
    ABLATION_VARIANTS, AblationMask, MetricName, MetricVector, MetricWeights,
    NormalizedMetrics, project_to_simplex,
)

__all__ = [
    # Network
    "Activation",
    "ForwardTrace",
    "LayerGradients",
    "LossKind",
    "LossType",
    "MlpModel",
    "OutputKind",
    # Valuation
    "ABLATION_VARIANTS",
    "AblationMask",
    "MetricName",
    "MetricVector",
    "MetricWeights",
    "NormalizedMetrics",
    "project_to_simplex",
    # Bandit
    "BanditState",
    "RegretTrace",
    "UcbArm",
    # Selection
    "BayesOptConfig",
    "ProbeConfig",
    "RoundRecord",
    "ScoredCandidate",
    "SelectionConfig",
    "SelectionReport",
    # Sources
    "CorruptionSpec",
    "DataSource",
    "Sample",
    "SourcePool",
    "Split",
    "sample_digest",
    "stack_samples",
]
