"""
dvcselect: training subset selection by data value contribution.

This package provides:
- A from-scratch MLP with per-layer gradients
- Six value metrics combined under adaptively learned weights
- UCB source sampling with regret accounting
- Diversity-gated batch selection under a budget
- Synthetic and tabular multi-source pools, baselines and an experiment harness
"""

__version__ = "0.1.0"

# Core domain models
from .domain.models import (
    AblationMask,
    LossKind,
    MetricWeights,
    MlpModel,
    Sample,
    SelectionConfig,
    SelectionReport,
    SourcePool,
)

# Selection entry points
from .domain.services import SelectionEngine, run_selection

# Shared exceptions
from .shared.exceptions import (
    ConfigurationError,
    DvcSelectError,
    SchemaError,
)

# Configuration
from .infrastructure.config.settings import get_settings

__all__ = [
    # Version info
    "__version__",

    # Domain models
    "AblationMask",
    "LossKind",
    "MetricWeights",
    "MlpModel",
    "Sample",
    "SelectionConfig",
    "SelectionReport",
    "SourcePool",

    # Selection
    "SelectionEngine",
    "run_selection",

    # Exceptions
    "ConfigurationError",
    "DvcSelectError",
    "SchemaError",

    # Configuration
    "get_settings",
]
