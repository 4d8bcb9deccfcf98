"""Prometheus metrics for fastskip (optional).

Usage:
    from fastskip.core.telemetry import get_metrics

    metrics = get_metrics()
    with metrics.track_decode("fastskip"):
        trace = fast_skip_decode(params, encoded, cfg)

    from prometheus_client import generate_latest
    print(generate_latest())
"""

import time
from contextlib import contextmanager
from typing import Any, Optional

try:
    from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram

    HAS_PROMETHEUS = True
except ImportError:
    HAS_PROMETHEUS = False
    CollectorRegistry = None  # type: ignore[assignment,misc]


class FastSkipMetrics:
    """Prometheus metrics contract for decoding and training.

    * ``fastskip_decodes_total{mode}``: decoded utterances
    * ``fastskip_decode_seconds{mode}``: histogram of decode latency
    * ``fastskip_joint_calls_total{mode}``: joint network evaluations
    * ``fastskip_frames_total{mode,state}``: frames by triggered/skipped
    * ``fastskip_train_steps_total``: optimizer steps
    * ``fastskip_train_loss``: gauge of the last joint loss

    Silent no-op when ``prometheus_client`` is not installed.
    """

    def __init__(
        self,
        enabled: bool = True,
        prefix: str = "fastskip",
        registry: Optional["CollectorRegistry"] = None,
    ):
        self.enabled = enabled and HAS_PROMETHEUS
        if not self.enabled:
            return

        reg_kw = {"registry": registry} if registry is not None else {}

        self.decodes_total = Counter(
            f"{prefix}_decodes_total", "Decoded utterances", ["mode"], **reg_kw
        )
        self.decode_seconds = Histogram(
            f"{prefix}_decode_seconds", "Decode latency", ["mode"], **reg_kw
        )
        self.joint_calls_total = Counter(
            f"{prefix}_joint_calls_total",
            "Joint network evaluations",
            ["mode"],
            **reg_kw,
        )
        self.frames_total = Counter(
            f"{prefix}_frames_total",
            "Encoded frames by decode state",
            ["mode", "state"],
            **reg_kw,
        )
        self.train_steps_total = Counter(
            f"{prefix}_train_steps_total", "Optimizer steps", **reg_kw
        )
        self.train_loss = Gauge(
            f"{prefix}_train_loss", "Joint loss of the last step", **reg_kw
        )

    @contextmanager
    def track_decode(self, mode: str) -> Any:
        """Track decode latency and count."""
        if not self.enabled:
            yield
            return
        start = time.perf_counter()
        try:
            yield
            self.decodes_total.labels(mode=mode).inc()
        finally:
            self.decode_seconds.labels(mode=mode).observe(time.perf_counter() - start)

    def record_trace(
        self, mode: str, joint_calls: int, triggered: int, skipped: int
    ) -> None:
        """Publish the counters of one decode trace."""
        if not self.enabled:
            return
        self.joint_calls_total.labels(mode=mode).inc(joint_calls)
        self.frames_total.labels(mode=mode, state="triggered").inc(triggered)
        self.frames_total.labels(mode=mode, state="skipped").inc(skipped)

    def record_train_step(self, joint_loss: float) -> None:
        if self.enabled:
            self.train_steps_total.inc()
            self.train_loss.set(joint_loss)


# Singleton
_metrics: Optional[FastSkipMetrics] = None


def get_metrics(enabled: bool = True) -> FastSkipMetrics:
    """Get or create metrics instance."""
    global _metrics
    if _metrics is None:
        _metrics = FastSkipMetrics(enabled=enabled)
    return _metrics
