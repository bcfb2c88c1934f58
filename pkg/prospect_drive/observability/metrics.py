"""
Prospect Drive - Metrics
Prometheus counters for the numerical pipeline: clamps, offset shifts and optimizer runs.
"""

import time
from contextlib import contextmanager
from functools import wraps
from typing import Callable, Iterator, Optional

from prometheus_client import Counter, Histogram, generate_latest
from prometheus_client.registry import CollectorRegistry


class PipelineMetrics:
    """
    Metrics collected while fitting and predicting.

    Each instance owns its registry so tests can inspect counters in isolation.
    """

    def __init__(self, registry: Optional[CollectorRegistry] = None):
        self.registry = registry or CollectorRegistry()

        # Probabilities pushed into [eps, 1 - eps] before taking logs
        self.probability_clamps = Counter(
            'prospect_drive_probability_clamps_total',
            'Predicted probabilities clamped before the cross-entropy log',
            registry=self.registry
        )

        self.gain_shifts = Counter(
            'prospect_drive_gain_shifts_total',
            'Driving utilities shifted by a common offset into the gains-only regime',
            registry=self.registry
        )

        self.stop_relaxations = Counter(
            'prospect_drive_stop_relaxations_total',
            'Yield stop bounds moved because braking at a_min could not honor them',
            registry=self.registry
        )

        self.optimizer_runs = Counter(
            'prospect_drive_optimizer_runs_total',
            'Optimizer runs',
            ['optimizer', 'outcome'],
            registry=self.registry
        )

        self.optimizer_iterations = Histogram(
            'prospect_drive_optimizer_iterations',
            'Iterations used per optimizer run',
            ['optimizer'],
            buckets=[1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, float('inf')],
            registry=self.registry
        )

        self.stage_duration = Histogram(
            'prospect_drive_stage_duration_seconds',
            'Wall time spent per pipeline stage',
            ['stage'],
            buckets=[.001, .01, .05, .1, .5, 1.0, 5.0, 30.0, 120.0, float('inf')],
            registry=self.registry
        )

    def record_optimizer(self, optimizer: str, iterations: int, converged: bool) -> None:
        """Record a finished optimizer run"""
        outcome = "converged" if converged else "not_converged"
        self.optimizer_runs.labels(optimizer=optimizer, outcome=outcome).inc()
        self.optimizer_iterations.labels(optimizer=optimizer).observe(iterations)

    def count(self, name: str) -> float:
        """Current value of an unlabeled counter, e.g. ``count("probability_clamps")``"""
        value = self.registry.get_sample_value(f"prospect_drive_{name}_total")
        return value or 0.0

    @contextmanager
    def measure(self, stage: str) -> Iterator[None]:
        """Context manager timing one pipeline stage"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.stage_duration.labels(stage=stage).observe(time.perf_counter() - start)

    def exposition(self) -> bytes:
        """Prometheus text exposition of every metric"""
        return generate_latest(self.registry)


_metrics: Optional[PipelineMetrics] = None


def get_metrics() -> PipelineMetrics:
    """Get or create metrics singleton"""
    global _metrics
    if _metrics is None:
        _metrics = PipelineMetrics()
    return _metrics


def reset_metrics() -> None:
    """Reset metrics (useful for testing)"""
    global _metrics
    _metrics = None


def monitored(stage: str) -> Callable:
    """Decorator timing a function as a pipeline stage"""
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            with get_metrics().measure(stage):
                return func(*args, **kwargs)
        return wrapper
    return decorator
