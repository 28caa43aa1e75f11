"""
Configuration package.
"""

from .settings import (
    Settings,
    ModelSettings,
    CacheSettings,
    StatisticsSettings,
    LshSettings,
    MetricSettings,
    WeightLearnerSettings,
    BanditSettings,
    SelectionSettings,
    TrainingSettings,
    SynthesisSettings,
    LoggingSettings,
    ObservabilitySettings,
    OutputSettings,
    get_settings,
    reload_settings,
)

__all__ = [
    "Settings",
    "ModelSettings",
    "CacheSettings",
    "StatisticsSettings",
    "LshSettings",
    "MetricSettings",
    "WeightLearnerSettings",
    "BanditSettings",
    "SelectionSettings",
    "TrainingSettings",
    "SynthesisSettings",
    "LoggingSettings",
    "ObservabilitySettings",
    "OutputSettings",
    "get_settings",
    "reload_settings",
]
