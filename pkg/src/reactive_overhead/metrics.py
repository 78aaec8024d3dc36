"""Per-run counters and the three evaluation metrics.

Throughput, end-to-end delay and routing load are each reported in two
forms: the conventional definition and the published formula evaluated
literally. ``None`` marks a metric that is undefined for the run (for
example a delay when nothing was delivered).
"""

from __future__ import annotations

import statistics
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

from .packets import ALL_KINDS, ROUTING_KINDS

METRIC_NAMES = (
    "throughput",
    "delivery_ratio",
    "e2e_delay_mean",
    "e2e_delay_literal",
    "nrl_conventional",
    "routing_load_literal",
)


@dataclass
class MetricsReport:
    duration: float
    tx: Dict[str, int] = field(default_factory=lambda: {k.value: 0 for k in ALL_KINDS})
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0
    delivered_bytes: int = 0
    latencies: List[float] = field(default_factory=list)
    gratuitous_rrep: int = 0
    notes: Dict[str, int] = field(default_factory=dict)
    drop_reasons: Dict[str, int] = field(default_factory=dict)
    throughput: Optional[float] = None
    delivery_ratio: Optional[float] = None
    e2e_delay_mean: Optional[float] = None
    e2e_delay_literal: Optional[float] = None
    nrl_conventional: Optional[float] = None
    routing_load_literal: Optional[float] = None

    @property
    def routing_transmissions(self) -> int:
        return sum(self.tx[k.value] for k in ROUTING_KINDS)

    @property
    def data_transmissions(self) -> int:
        return self.tx["DATA"]

    @property
    def data_sent(self) -> int:
        """DATA packets handed to the network at their sources."""
        return self.generated

    def check(self) -> None:
        if self.delivered > self.generated:
            raise AssertionError("delivered exceeds generated")
        if any(v < 0 for v in self.tx.values()):
            raise AssertionError("negative transmission count")
        if len(self.latencies) != self.delivered:
            raise AssertionError("one latency per delivered packet expected")
        if self.generated != self.delivered + self.dropped + self.in_flight:
            raise AssertionError(
                f"conservation violated: {self.generated} != "
                f"{self.delivered} + {self.dropped} + {self.in_flight}"
            )

    def finalize(self) -> "MetricsReport":
        self.throughput = throughput(self)
        self.delivery_ratio = self.delivered / self.generated if self.generated else None
        self.e2e_delay_mean, self.e2e_delay_literal = e2e_delay(self)
        self.nrl_conventional, self.routing_load_literal = routing_load(self)
        return self

    def metrics(self) -> Dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def to_dict(self) -> dict:
        return asdict(self)


def throughput(report: MetricsReport) -> float:
    """Delivered payload bytes per second of simulated time."""
    if report.duration <= 0:
        raise ValueError("duration must be > 0")
    return report.delivered_bytes / report.duration


def literal_delay(transmitted: int, rtt: float, received: int) -> Optional[float]:
    if received <= 0:
        return None
    return transmitted * rtt / received


def e2e_delay(report: MetricsReport) -> Tuple[Optional[float], Optional[float]]:
    """(mean one-way latency, published formula with RTT = 2 x mean)."""
    if report.delivered <= 0 or not report.latencies:
        return None, None
    mean = statistics.fmean(report.latencies)
    return mean, literal_delay(report.data_sent, 2 * mean, report.delivered)


def routing_load(report: MetricsReport) -> Tuple[Optional[float], float]:
    routing = report.routing_transmissions
    literal = float(routing + report.data_transmissions - report.data_sent)
    if report.delivered <= 0:
        return None, literal
    return routing / report.delivered, literal
