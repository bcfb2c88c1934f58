"""
Prospect Drive - Observability
Structured logging and Prometheus metrics.
"""

from .logs import configure_logging
from .metrics import PipelineMetrics, get_metrics, monitored, reset_metrics

__all__ = [
    "configure_logging",
    "PipelineMetrics",
    "get_metrics",
    "monitored",
    "reset_metrics",
]
