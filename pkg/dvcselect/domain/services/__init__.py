"""
Domain services package.
"""

from .grad_cache import CacheKey, CacheStats, GradCache
from .lsh_index import LshIndex
from .online_stats import OnlineStatistics, WelfordAccumulator
from .selection_engine import SelectionEngine, cold_start, diversified_selection, run_selection
from .weight_learner import AdaptiveWeightLearner, GpSurrogate, ResponseSurface, optimize_weights

__all__ = [
    "AdaptiveWeightLearner",
    "CacheKey",
    "CacheStats",
    "GpSurrogate",
    "GradCache",
    "LshIndex",
    "OnlineStatistics",
    "ResponseSurface",
    "SelectionEngine",
    "WelfordAccumulator",
    "cold_start",
    "diversified_selection",
    "optimize_weights",
    "run_selection",
]
