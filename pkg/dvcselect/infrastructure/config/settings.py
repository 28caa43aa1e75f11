"""
Configuration management for the application.

Every tunable constant of the valuation and selection stack lives here. Values
come from (in order of precedence) an explicit config file, the default search
paths, then the dataclass defaults below; a few ambient settings also honour
environment variables loaded from ``.env``.
"""

import os
from pathlib import Path
from typing import Optional, Dict, Any, List
from dataclasses import dataclass, field, asdict, fields
from dotenv import load_dotenv
import yaml
import json

from ...shared.exceptions import ConfigurationError

# Load environment variables
load_dotenv()


@dataclass
class ModelSettings:
    """Valuation network configuration."""
    hidden_dims: List[int] = field(default_factory=lambda: [64, 32])
    activation: str = "relu"
    learning_rate: float = 0.05
    init_seed: int = 0


@dataclass
class CacheSettings:
    """Gradient cache configuration."""
    capacity: int = 4096


@dataclass
class StatisticsSettings:
    """Streaming reference statistics configuration."""
    momentum_decay: float = 0.9
    norm_buffer_size: int = 512
    loss_window: int = 8
    loss_history_capacity: int = 16384
    default_bandwidth: float = 1.0
    bandwidth_floor: float = 1e-6


@dataclass
class LshSettings:
    """Locality-sensitive hashing configuration."""
    num_bits: int = 12
    num_tables: int = 16
    top_k: int = 32
    density_floor: float = 1e-12
    seed: int = 17


@dataclass
class MetricSettings:
    """Value metric configuration."""
    quality_mode: str = "literal"
    symmetric_scale: float = 4.0
    disabled_metrics: List[str] = field(default_factory=list)


@dataclass
class WeightLearnerSettings:
    """Bayesian weight optimisation configuration."""
    update_frequency: int = 5
    max_evaluations: int = 15
    patience: int = 3
    min_improvement: float = 0.002
    probe_epochs: int = 5
    length_scale: float = 0.3
    signal_variance: float = 1.0
    jitter: float = 1e-6
    dirichlet_candidates: int = 256
    local_perturbations: int = 32
    perturbation_scale: float = 0.05
    quadratic_trend: bool = True


@dataclass
class BanditSettings:
    """Source bandit configuration."""
    exploration: float = 1.0
    probability_floor: float = 0.01


@dataclass
class SelectionSettings:
    """Selection loop configuration."""
    batch_size: int = 8
    diversity_threshold: float = 0.95
    relax_step: float = 0.02
    source_quota: Optional[int] = None


@dataclass
class TrainingSettings:
    """Final-model training configuration shared by every method."""
    epochs: int = 30
    learning_rate: float = 0.05
    batch_size: int = 32


@dataclass
class SynthesisSettings:
    """Synthetic multi-source pool configuration."""
    num_classes: int = 4
    num_features: int = 32
    num_sources: int = 6
    pool_size: int = 12000
    validation_size: int = 1000
    test_size: int = 2000
    clusters_per_class: int = 2
    separation: float = 2.0
    flip_rates: List[float] = field(
        default_factory=lambda: [0.0, 0.05, 0.1, 0.2, 0.3, 0.4]
    )
    noise_levels: Optional[List[float]] = None
    duplication_factors: Optional[List[int]] = None


@dataclass
class LoggingSettings:
    """Logging configuration settings."""
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - [%(run)s] %(message)s"
    stream: str = "stderr"
    file_path: Optional[str] = None
    max_file_size_mb: int = 10
    backup_count: int = 5

    def __post_init__(self):
        """Load log level from environment."""
        self.level = os.getenv('DVCSELECT_LOG_LEVEL', self.level)


@dataclass
class ObservabilitySettings:
    """Observability configuration settings."""
    tracing_enabled: bool = False
    service_name: str = "dvcselect"
    service_version: str = "0.1.0"
    environment: str = "development"
    otlp_endpoint: Optional[str] = None
    console_export: bool = False

    def __post_init__(self):
        """Load settings from environment."""
        env_enabled = os.getenv('OTEL_ENABLED')
        if env_enabled is not None:
            self.tracing_enabled = env_enabled.lower() == 'true'
        self.service_name = os.getenv('OTEL_SERVICE_NAME', self.service_name)
        self.environment = os.getenv('OTEL_ENVIRONMENT', self.environment)
        self.otlp_endpoint = os.getenv('OTEL_EXPORTER_OTLP_ENDPOINT', self.otlp_endpoint)
        if os.getenv('OTEL_CONSOLE_EXPORT', '').lower() == 'true':
            self.console_export = True


@dataclass
class OutputSettings:
    """Report output configuration."""
    data_directory: str = "dvcselect-output"
    audit_log: Optional[str] = None


_SECTIONS = {
    'model': ModelSettings,
    'cache': CacheSettings,
    'statistics': StatisticsSettings,
    'lsh': LshSettings,
    'metrics': MetricSettings,
    'weights': WeightLearnerSettings,
    'bandit': BanditSettings,
    'selection': SelectionSettings,
    'training': TrainingSettings,
    'synthesis': SynthesisSettings,
    'logging': LoggingSettings,
    'observability': ObservabilitySettings,
    'output': OutputSettings,
}


@dataclass
class Settings:
    """Main application settings."""
    model: ModelSettings
    cache: CacheSettings
    statistics: StatisticsSettings
    lsh: LshSettings
    metrics: MetricSettings
    weights: WeightLearnerSettings
    bandit: BanditSettings
    selection: SelectionSettings
    training: TrainingSettings
    synthesis: SynthesisSettings
    logging: LoggingSettings
    observability: ObservabilitySettings
    output: OutputSettings
    experiment: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def load_from_file(cls, config_path: Optional[Path] = None) -> 'Settings':
        """Load settings from configuration file."""
        if config_path is not None:
            if not config_path.exists():
                raise ConfigurationError(f"Config file not found: {config_path}")
            return cls._load_config_file(config_path)

        default_paths = [
            Path.home() / '.dvcselect' / 'config.yaml',
            Path.home() / '.dvcselect' / 'config.json',
            Path.cwd() / 'dvcselect.config.yaml',
            Path.cwd() / 'dvcselect.config.json',
        ]

        for path in default_paths:
            if path.exists():
                return cls._load_config_file(path)

        return cls.default()

    @classmethod
    def default(cls) -> 'Settings':
        """Create default settings."""
        return cls._from_dict({})

    @classmethod
    def _load_config_file(cls, config_path: Path) -> 'Settings':
        """Load configuration from a specific file."""
        suffix = config_path.suffix.lower()
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                if suffix in ['.yaml', '.yml']:
                    data = yaml.safe_load(f) or {}
                elif suffix == '.json':
                    data = json.load(f) or {}
                else:
                    raise ConfigurationError(f"Unsupported config file format: {suffix}")
        except (OSError, yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Failed to load config from {config_path}: {e}")

        if not isinstance(data, dict):
            raise ConfigurationError(f"Config root must be a mapping: {config_path}")
        return cls._from_dict(data)

    @classmethod
    def _from_dict(cls, data: Dict[str, Any]) -> 'Settings':
        """Create settings from dictionary."""
        unknown = set(data) - set(_SECTIONS) - {'experiment'}
        if unknown:
            raise ConfigurationError(f"Unknown config sections: {sorted(unknown)}")

        sections = {}
        for name, section_cls in _SECTIONS.items():
            values = data.get(name) or {}
            allowed = {f.name for f in fields(section_cls)}
            bad_keys = set(values) - allowed
            if bad_keys:
                raise ConfigurationError(
                    f"Unknown keys in section '{name}': {sorted(bad_keys)}"
                )
            sections[name] = section_cls(**values)

        settings = cls(experiment=dict(data.get('experiment') or {}), **sections)
        settings.validate()
        return settings

    def validate(self) -> None:
        """Check cross-field constraints that dataclass typing cannot express."""
        if self.cache.capacity < 1:
            raise ConfigurationError("cache.capacity must be >= 1")
        if not 0.0 < self.statistics.momentum_decay < 1.0:
            raise ConfigurationError("statistics.momentum_decay must lie in (0, 1)")
        if self.statistics.loss_window < 2 or self.statistics.norm_buffer_size < 1:
            raise ConfigurationError("statistics windows are too small")
        if self.statistics.loss_history_capacity < 1:
            raise ConfigurationError("statistics.loss_history_capacity must be >= 1")
        if self.lsh.num_bits < 1 or self.lsh.num_tables < 1 or self.lsh.top_k < 1:
            raise ConfigurationError("lsh sizes must be positive")
        if self.metrics.quality_mode not in ("literal", "symmetric"):
            raise ConfigurationError(
                f"metrics.quality_mode must be 'literal' or 'symmetric', "
                f"got '{self.metrics.quality_mode}'"
            )
        if self.weights.update_frequency < 1:
            raise ConfigurationError("weights.update_frequency must be >= 1")
        if self.selection.batch_size < 1:
            raise ConfigurationError("selection.batch_size must be >= 1")
        if not 0.0 < self.selection.diversity_threshold <= 1.0:
            raise ConfigurationError("selection.diversity_threshold must lie in (0, 1]")
        if self.model.activation not in ("relu", "tanh"):
            raise ConfigurationError(f"Unknown activation '{self.model.activation}'")
        if any(width < 1 for width in self.model.hidden_dims):
            raise ConfigurationError("model.hidden_dims entries must be positive")
        if self.logging.stream not in ("stderr", "stdout"):
            raise ConfigurationError("logging.stream must be 'stderr' or 'stdout'")

    def to_dict(self) -> Dict[str, Any]:
        """Convert settings to dictionary."""
        data = {name: asdict(getattr(self, name)) for name in _SECTIONS}
        data['experiment'] = dict(self.experiment)
        return data

    def save_to_file(self, config_path: Path) -> None:
        """Save settings to configuration file."""
        config_path.parent.mkdir(parents=True, exist_ok=True)
        data = self.to_dict()

        with open(config_path, 'w', encoding='utf-8') as f:
            if config_path.suffix.lower() in ['.yaml', '.yml']:
                yaml.dump(data, f, default_flow_style=False, sort_keys=True)
            elif config_path.suffix.lower() == '.json':
                json.dump(data, f, indent=2, sort_keys=True)
            else:
                raise ConfigurationError(
                    f"Unsupported config file format: {config_path.suffix}"
                )


# Global settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get global settings instance."""
    global _settings
    if _settings is None:
        _settings = Settings.load_from_file()
    return _settings


def reload_settings(config_path: Optional[Path] = None) -> Settings:
    """Reload global settings."""
    global _settings
    _settings = Settings.load_from_file(config_path)
    return _settings
