"""
Observability infrastructure package.
"""

from .tracing import (
    init_tracing,
    shutdown_tracing,
    get_tracer,
    TracingConfig,
    trace_selection_round,
    trace_experiment_cell,
    trace_execution,
    record_round_metrics,
    record_error,
    get_current_trace_info,
)
from .instrumented_service import InstrumentedSelectionEngine

__all__ = [
    "init_tracing",
    "shutdown_tracing",
    "get_tracer",
    "TracingConfig",
    "trace_selection_round",
    "trace_experiment_cell",
    "trace_execution",
    "record_round_metrics",
    "record_error",
    "get_current_trace_info",
    "InstrumentedSelectionEngine",
]
