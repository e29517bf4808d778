"""Tracing of engine tasks with OpenTelemetry."""

from opentelemetry import trace
from opentelemetry.sdk.resources import SERVICE_NAME, Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import ConsoleSpanExporter, SimpleSpanProcessor

import config

_configured = False


def setup_tracing(service_name="leafspace", exporter=None):
    """Setup tracing for the engine.

    Args:
        service_name: Name of the service for tracing
        exporter: "console" or "none"; defaults to config.TRACE_EXPORTER

    Returns:
        Tracer for this process
    """
    global _configured
    exporter = exporter or config.TRACE_EXPORTER

    if not _configured:
        resource = Resource(attributes={
            SERVICE_NAME: service_name
        })
        provider = TracerProvider(resource=resource)
        if exporter == "console":
            provider.add_span_processor(SimpleSpanProcessor(ConsoleSpanExporter()))
        trace.set_tracer_provider(provider)
        _configured = True

    return trace.get_tracer(service_name)


def get_tracer():
    """Get the engine tracer (a no-op tracer until setup_tracing runs)."""
    return trace.get_tracer("leafspace")


def trace_task(tracer, command: str, scenario: str):
    """Create a span for one scenario task.

    Args:
        tracer: OpenTelemetry tracer
        command: CLI command name
        scenario: Scenario name

    Returns:
        Span context manager
    """
    return tracer.start_as_current_span(
        f"task.{command}",
        attributes={
            "task.command": command,
            "scenario.name": scenario
        }
    )


def trace_numeric(tracer, operation: str, **kwargs):
    """Create a span for a numeric kernel (ranks, sweeps, quadrature).

    Args:
        tracer: OpenTelemetry tracer
        operation: Operation name
        **kwargs: Operation parameters

    Returns:
        Span context manager
    """
    return tracer.start_as_current_span(
        f"numeric.{operation}",
        attributes={
            "numeric.operation": operation,
            **{f"numeric.param.{k}": str(v) for k, v in kwargs.items()}
        }
    )
