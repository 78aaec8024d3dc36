"""Closed-form routing overhead of reactive route discovery and monitoring.

Discovery cost is the RREQ flood plus the RREP return; monitoring cost is
the HELLO traffic exchanged by both endpoints of every link of every live
route. All evaluators are pure functions of their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence

DEFAULT_COVERAGE = {2: 0.19, 3: 0.33, 4: 0.41}


@dataclass(frozen=True)
class AnalyticalParams:
    """Network and protocol parameters of the overhead function.

    ``H`` may be real-valued for differentiation; evaluators that need a
    number of tiers round it.
    """

    n: float
    H: float
    T: float = 10.0
    t: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        for name in ("n", "H", "T", "t", "p"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.H < 1:
            raise ValueError(f"H must be >= 1, got {self.H}")
        if self.T <= 0 or self.t <= 0:
            raise ValueError("T and t must be > 0")
        if self.t > self.T:
            raise ValueError(f"monitor interval t={self.t} exceeds route life T={self.T}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @property
    def tiers(self) -> int:
        return max(1, int(math.floor(self.H + 0.5)))


@dataclass(frozen=True)
class CoverageIndexTable:
    C: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_COVERAGE))

    def __post_init__(self):
        if set(self.C) != {2, 3, 4}:
            raise ValueError(f"coverage table must cover exactly i = 2, 3, 4, got {sorted(self.C)}")
        for i, c in self.C.items():
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"C[{i}] = {c} outside [0, 1]")

    @classmethod
    def uniform(cls, value: float) -> "CoverageIndexTable":
        return cls({2: value, 3: value, 4: value})

    def scaled(self, k: float) -> Dict[int, float]:
        return {i: k * c for i, c in self.C.items()}


@dataclass(frozen=True)
class RouteDescriptor:
    l: int
    T: float
    t: float

    def __post_init__(self):
        if self.l < 1:
            raise ValueError(f"route must have at least one link, got l={self.l}")
        if self.T <= 0:
            raise ValueError("route life T must be > 0")
        if self.t <= 0:
            raise ValueError("monitor interval t must be > 0")


@dataclass(frozen=True)
class OverheadBreakdown:
    rreq: float
    rrep: float
    discovery: float
    hello: float
    aggregate: float


def _coverage(cov) -> Mapping[int, float]:
    if cov is None:
        return DEFAULT_COVERAGE
    if isinstance(cov, CoverageIndexTable):
        return cov.C
    return cov


def _check_tiers(params: AnalyticalParams, tiers: Optional[Sequence[float]]) -> Sequence[float]:
    need = params.tiers - 1
    tiers = list(tiers or ())
    if len(tiers) < need:
        raise ValueError(f"need N_j for j = 1..{need}, got {len(tiers)} values")
    return tiers


def rreq_terms(params: AnalyticalParams, cov, tiers):
    """Yield ``(h, i, bracket, C_i)`` for every tier/neighbor-class pair.

    ``bracket`` is the unclamped remaining-node count
    ``(n - 1 - i) - sum_{j<h} N_j``.
    """
    tiers = _check_tiers(params, tiers)
    C = _coverage(cov)
    reached = 0.0
    for h in range(1, params.tiers + 1):
        for i in (2, 3, 4):
            yield h, i, (params.n - 1 - i) - reached, C[i]
        if h <= len(tiers):
            reached += tiers[h - 1]


def rreq_overhead(params: AnalyticalParams, cov=None, tiers: Sequence[float] = ()) -> float:
    total = 0.0
    for h, i, bracket, c in rreq_terms(params, cov, tiers):
        if bracket > 0:
            total += 4 * 3 ** (h - 1) * bracket * params.p * c
    return total


def rrep_raw(params: AnalyticalParams) -> float:
    H = params.H
    return H + (H / 2) * (params.n - H - 2) * params.p


def rrep_overhead(params: AnalyticalParams) -> float:
    # a reply crosses at least the H reverse hops
    return max(params.H, rrep_raw(params))


def discovery_overhead(params: AnalyticalParams, cov=None, tiers: Sequence[float] = ()) -> float:
    return rreq_overhead(params, cov, tiers) + rrep_overhead(params)


def hello_overhead_route(route: RouteDescriptor, integer_periods: bool = False) -> float:
    """HELLOs exchanged while monitoring one route: both ends of every link
    emit once per interval."""
    if route.t <= 0:
        raise ValueError("monitor interval must be > 0")
    periods = math.floor(route.T / route.t) if integer_periods else route.T / route.t
    return 2 * periods * route.l


def hello_overhead_total(routes: Iterable[RouteDescriptor], integer_periods: bool = False) -> float:
    return sum((hello_overhead_route(r, integer_periods) for r in routes), 0.0)


def aggregate_overhead(
    params: AnalyticalParams,
    cov=None,
    tiers: Sequence[float] = (),
    routes: Iterable[RouteDescriptor] = (),
) -> OverheadBreakdown:
    rreq = rreq_overhead(params, cov, tiers)
    rrep = rrep_overhead(params)
    hello = hello_overhead_total(routes)
    discovery = rreq + rrep
    return OverheadBreakdown(rreq, rrep, discovery, hello, discovery + hello)
