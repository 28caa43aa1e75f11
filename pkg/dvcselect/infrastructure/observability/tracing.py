"""
OpenTelemetry tracing for selection runs.

Spans: one per experiment cell (``experiment.<method>``), one per selection
round (``selection.round.<n>``) and one per decorated operation. Tracing is a
no-op until ``init_tracing`` runs with ``enabled=True``.
"""

from contextlib import contextmanager
from dataclasses import dataclass
from functools import wraps
from typing import TYPE_CHECKING, Any, Callable, Dict, Optional, TypeVar

from opentelemetry import trace
from opentelemetry.sdk.resources import SERVICE_NAME, Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor, ConsoleSpanExporter
from opentelemetry.trace import Span, Status, StatusCode

from ...domain.models.selection import RoundRecord
from ...shared.logging import get_logger

if TYPE_CHECKING:
    from ..config.settings import ObservabilitySettings

# The OTLP exporter ships in the optional ``otlp`` extra
try:
    from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
    OTLP_AVAILABLE = True
except ImportError:
    OTLP_AVAILABLE = False

logger = get_logger("dvcselect.tracing")

F = TypeVar('F', bound=Callable[..., Any])


@dataclass
class TracingConfig:
    """Where spans go and how the service is labelled."""
    service_name: str = "dvcselect"
    service_version: str = "0.1.0"
    environment: str = "development"
    otlp_endpoint: Optional[str] = None
    console_export: bool = False
    enabled: bool = False

    @classmethod
    def from_settings(cls, observability: "ObservabilitySettings") -> "TracingConfig":
        """Build from ``ObservabilitySettings`` (which already folds in the OTEL_* variables)."""
        return cls(
            service_name=observability.service_name,
            service_version=observability.service_version,
            environment=observability.environment,
            otlp_endpoint=observability.otlp_endpoint,
            console_export=observability.console_export,
            enabled=observability.tracing_enabled,
        )


_tracer_provider: Optional[TracerProvider] = None
_initialized: bool = False


def init_tracing(config: Optional[TracingConfig] = None) -> None:
    """Install a tracer provider; later calls are ignored until ``shutdown_tracing``."""
    global _tracer_provider, _initialized

    if _initialized:
        return
    _initialized = True

    config = config or TracingConfig()
    if not config.enabled:
        return

    _tracer_provider = TracerProvider(resource=Resource.create({
        SERVICE_NAME: config.service_name,
        "service.version": config.service_version,
        "deployment.environment": config.environment,
    }))

    if config.otlp_endpoint:
        if OTLP_AVAILABLE:
            exporter = OTLPSpanExporter(endpoint=config.otlp_endpoint)
            _tracer_provider.add_span_processor(BatchSpanProcessor(exporter))
        else:
            logger.warning(
                f"OTLP endpoint {config.otlp_endpoint} configured but the exporter is not "
                f"installed (pip install dvcselect[otlp]); spans will not be exported there"
            )
    if config.console_export:
        _tracer_provider.add_span_processor(BatchSpanProcessor(ConsoleSpanExporter()))

    trace.set_tracer_provider(_tracer_provider)
    logger.info(f"Tracing enabled for service {config.service_name}")


def shutdown_tracing() -> None:
    """Flush pending spans and allow a fresh ``init_tracing``."""
    global _tracer_provider, _initialized

    if _tracer_provider is not None:
        _tracer_provider.shutdown()
        _tracer_provider = None
    _initialized = False


def get_tracer(name: str = "dvcselect") -> trace.Tracer:
    return trace.get_tracer(name)


def get_current_trace_info() -> Dict[str, Optional[str]]:
    """Hex trace and span ids of the recording span, or None for both."""
    span = trace.get_current_span()
    if span and span.is_recording():
        ctx = span.get_span_context()
        return {
            "trace_id": format(ctx.trace_id, '032x'),
            "span_id": format(ctx.span_id, '016x')
        }
    return {"trace_id": None, "span_id": None}


@contextmanager
def _traced(name: str, attributes: Dict[str, Any]):
    tracer = get_tracer()
    with tracer.start_as_current_span(
        name=name,
        kind=trace.SpanKind.INTERNAL,
        attributes=attributes
    ) as span:
        try:
            yield span
            span.set_status(Status(StatusCode.OK))
        except Exception as e:
            record_error(span, e, getattr(e, "error_class", type(e).__name__))
            raise


@contextmanager
def trace_selection_round(
    round_index: int,
    remaining_budget: int,
    attributes: Optional[Dict[str, Any]] = None
):
    """
    Context manager for tracing one selection round.

    Usage:
        with trace_selection_round(3, 120) as span:
            record = engine.selection_round()
            record_round_metrics(span, record)
    """
    span_attributes: Dict[str, Any] = {
        "selection.round": round_index,
        "selection.remaining_budget": remaining_budget,
    }
    if attributes:
        span_attributes.update(attributes)
    with _traced(f"selection.round.{round_index}", span_attributes) as span:
        yield span


@contextmanager
def trace_experiment_cell(
    method: str,
    budget: float,
    seed: int,
    attributes: Optional[Dict[str, Any]] = None
):
    """Context manager for one (method, budget, seed) experiment cell."""
    span_attributes: Dict[str, Any] = {
        "experiment.method": method,
        "experiment.budget": budget,
        "experiment.seed": seed,
    }
    if attributes:
        span_attributes.update(attributes)
    with _traced(f"experiment.{method}", span_attributes) as span:
        yield span


def trace_execution(
    name: str,
    attributes: Optional[Dict[str, Any]] = None
) -> Callable[[F], F]:
    """
    Decorator for tracing function execution.

    Usage:
        @trace_execution("pool.synthesize")
        def synthesize(...):
            ...
    """
    def decorator(func: F) -> F:
        @wraps(func)
        def wrapper(*args, **kwargs):
            with _traced(name, attributes or {}):
                return func(*args, **kwargs)
        return wrapper  # type: ignore

    return decorator


def record_round_metrics(span: Span, record: RoundRecord) -> None:
    """Copy the round outcome onto its span."""
    span.set_attribute("selection.sources_chosen", record.sources_chosen)
    span.set_attribute("selection.candidates_valued", record.candidates_valued)
    span.set_attribute("selection.selected", len(record.selected_ids))
    span.set_attribute("selection.dvc_mean", record.dvc_mean)
    span.set_attribute("selection.dvc_max", record.dvc_max)
    span.set_attribute("selection.final_threshold", record.final_threshold)
    span.set_attribute("selection.model_version", record.model_version)


def record_error(span: Span, error: Exception, error_type: str = "unknown") -> None:
    """Record an error on a span."""
    span.set_attribute("error.type", error_type)
    span.set_attribute("error.message", str(error))
    span.set_status(Status(StatusCode.ERROR, str(error)))
    span.record_exception(error)
