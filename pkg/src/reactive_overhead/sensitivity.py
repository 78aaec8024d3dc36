"""Rates of change of the routing overhead function.

Two derivative paths are provided. ``"literal"`` evaluates the
published partial-derivative expressions as printed (they restate most of
the overhead function rather than differentiating it). ``"exact"`` returns
the true partial derivatives of the evaluator in :mod:`overhead`, checked
against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

from .overhead import (
    AnalyticalParams,
    RouteDescriptor,
    hello_overhead_total,
    rreq_overhead,
    rreq_terms,
    rrep_overhead,
    rrep_raw,
)

LITERAL = "literal"
EXACT = "exact"
MODES = (LITERAL, EXACT)

REL_STEP = 1e-6
ABS_STEP = 1e-9


class Rate(NamedTuple):
    value: float
    at_boundary: bool = False


@dataclass(frozen=True)
class SensitivityReport:
    mode: str
    dy_dn: float
    dy_dH: float
    dy_dT: float
    dy_dt: float
    dx: float
    dz: float
    dy: float
    at_boundary: bool = False


def fd_step(x: float) -> float:
    return max(REL_STEP * abs(x), ABS_STEP)


def central_difference(f: Callable[[float], float], x: float, step: float | None = None) -> float:
    h = fd_step(x) if step is None else step
    return (f(x + h) - f(x - h)) / (2 * h)


def overhead_function(params: AnalyticalParams, cov=None, tiers=(), routes: Sequence[RouteDescriptor] = ()) -> float:
    """y(n, H, T, t): discovery overhead plus monitoring of ``routes``."""
    return rreq_overhead(params, cov, tiers) + rrep_overhead(params) + hello_overhead_total(routes)


def shift_routes(routes: Sequence[RouteDescriptor], dT: float = 0.0, dt: float = 0.0):
    return [RouteDescriptor(r.l, r.T + dT, r.t + dt) for r in routes]


# -- monitoring part -------------------------------------------------------

def partial_T(routes: Sequence[RouteDescriptor]) -> float:
    return sum((2.0 / r.t) * r.l for r in routes)


def partial_t(routes: Sequence[RouteDescriptor]) -> float:
    return sum(-2.0 * (r.T / r.t**2) * r.l for r in routes)


# -- discovery part, printed expressions -----------------------------------

def partial_n_literal(params: AnalyticalParams, cov=None, tiers=()) -> float:
    H, p = params.H, params.p
    total = 0.0
    for h, i, bracket, c in rreq_terms(params, cov, tiers):
        # tiers that contribute nothing to the flood are gated out
        if bracket > 0:
            reached = (params.n - 1 - i) - bracket
            total += 4 * 3 ** (h - 1) * ((-i) - reached) * p * c
    return total + H + (H / 2) * (-H - 2) * p


def partial_H_literal(params: AnalyticalParams, cov=None, tiers=()) -> float:
    p = params.p
    total = 0.0
    for h, i, bracket, c in rreq_terms(params, cov, tiers):
        if bracket > 0:
            total += (4 * 3 ** (h - 1) + (h - 1) * 3 ** (h - 1)) * bracket * p * c
    return total + 1 + 0.5 * (params.n - 3) * p


def expanded_coefficients_literal(params: AnalyticalParams, cov=None, tiers=()) -> tuple[float, float]:
    """Coefficients of dn and dH as printed in the expanded total differential.

    These differ from :func:`partial_n_literal` / :func:`partial_H_literal`:
    the dn coefficient is the discovery overhead itself and the dH
    coefficient keeps the full flood term. The trailing ``+`` of the printed
    expression is dropped.
    """
    flood = rreq_overhead(params, cov, tiers)
    return flood + rrep_raw(params), flood + 1 + 0.5 * (params.n - 3) * params.p


# -- discovery part, exact -------------------------------------------------

def _rrep_active(params: AnalyticalParams) -> bool:
    return rrep_raw(params) > params.H


def _near_rrep_clamp(params: AnalyticalParams, step_n: float, step_H: float) -> bool:
    # raw - H = (H/2)(n - H - 2)p changes sign where n - H - 2 = 0
    return params.p > 0 and abs(params.n - params.H - 2) <= step_n + 2 * step_H


def partial_n_exact(params: AnalyticalParams, cov=None, tiers=()) -> Rate:
    step = fd_step(params.n)
    total = 0.0
    boundary = False
    for h, i, bracket, c in rreq_terms(params, cov, tiers):
        if abs(bracket) <= step:
            boundary = True
        if bracket > 0:
            total += 4 * 3 ** (h - 1) * params.p * c
    if _rrep_active(params):
        total += (params.H / 2) * params.p
    boundary = boundary or _near_rrep_clamp(params, step, 0.0)
    return Rate(total, boundary)


def partial_H_exact(params: AnalyticalParams, cov=None, tiers=()) -> Rate:
    """The flood term only changes when the rounded tier count does, so away
    from half-integer H its derivative vanishes."""
    H, n, p = params.H, params.n, params.p
    step = fd_step(H)
    frac = H - math.floor(H)
    boundary = abs(frac - 0.5) <= step
    if not boundary and tiers is not None:
        # tier count must stay covered on both sides of the stencil
        boundary = len(tiers) < max(1, int(math.floor(H + step + 0.5))) - 1
    boundary = boundary or _near_rrep_clamp(params, 0.0, step)
    value = 1 + p * (n - 2 * H - 2) / 2 if _rrep_active(params) else 1.0
    return Rate(value, boundary)


def numeric_partial(params: AnalyticalParams, name: str, cov=None, tiers=()) -> float:
    """Central-difference oracle on the discovery evaluator for ``n`` or ``H``."""

    def f(x):
        q = replace(params, **{name: x})
        return rreq_overhead(q, cov, tiers) + rrep_overhead(q)

    return central_difference(f, getattr(params, name))


# -- total differential ----------------------------------------------------

def total_differential(
    params: AnalyticalParams,
    cov=None,
    tiers=(),
    routes: Sequence[RouteDescriptor] = (),
    dn: float = 0.0,
    dH: float = 0.0,
    dT: float = 0.0,
    dt: float = 0.0,
    mode: str = EXACT,
) -> SensitivityReport:
    for name, d in (("dn", dn), ("dH", dH), ("dT", dT), ("dt", dt)):
        if not math.isfinite(d):
            raise ValueError(f"{name} must be finite")
    boundary = False
    if mode == EXACT:
        rn = partial_n_exact(params, cov, tiers)
        rH = partial_H_exact(params, cov, tiers)
        y_n, y_H = rn.value, rH.value
        boundary = rn.at_boundary or rH.at_boundary
    elif mode == LITERAL:
        y_n = partial_n_literal(params, cov, tiers)
        y_H = partial_H_literal(params, cov, tiers)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    y_T = partial_T(routes)
    y_t = partial_t(routes)
    dx = y_n * dn + y_H * dH
    dz = y_T * dT + y_t * dt
    return SensitivityReport(mode, y_n, y_H, y_T, y_t, dx, dz, dx + dz, boundary)


def prediction_error(
    params: AnalyticalParams,
    cov=None,
    tiers=(),
    routes: Sequence[RouteDescriptor] = (),
    dn: float = 0.0,
    dH: float = 0.0,
    dT: float = 0.0,
    dt: float = 0.0,
) -> float:
    """|y(x + d) - y(x) - dy| for the exact first-order prediction."""
    report = total_differential(params, cov, tiers, routes, dn, dH, dT, dt, mode=EXACT)
    moved = replace(params, n=params.n + dn, H=params.H + dH)
    y0 = overhead_function(params, cov, tiers, routes)
    y1 = overhead_function(moved, cov, tiers, shift_routes(routes, dT, dt))
    return abs(y1 - y0 - report.dy)
