"""Experiment runner: sweeps, seeds, CSV persistence and summaries.

Every run gets an id in the order of the cartesian product
sweep value x protocol x seed. Rows reach the CSV in id order even when
runs execute in parallel, and a failing run stops the experiment after the
rows before it have been written.
"""

from __future__ import annotations

import csv
import json
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, is_dataclass, replace
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .config import (
    ANALYTIC,
    COMPARE,
    SENSITIVITY,
    SIMULATE,
    VALIDATE,
    AnalyticSpec,
    Experiment,
    ValidateSpec,
    apply_sweep_value,
)
from .grid import BlackoutRegion, apply_blackout, build_grid, flood_oracle, hop_count, tier_neighbor_profile
from .metrics import METRIC_NAMES, MetricsReport
from .overhead import AnalyticalParams, CoverageIndexTable, OverheadBreakdown, aggregate_overhead, rreq_overhead
from .packets import ALL_KINDS
from .protocols import ProtocolParams
from .sensitivity import SensitivityReport, overhead_function, shift_routes, total_differential
from .simulator import Flow, ScenarioConfig, Simulator

HIGHER_IS_BETTER = {"throughput", "delivery_ratio"}

SIM_COLUMNS = (
    ["run_id", "protocol", "seed", "nodes", "speed", "flow_count", "sweep_parameter", "sweep_value"]
    + [f"tx_{k.value}" for k in ALL_KINDS]
    + ["routing_tx", "generated", "delivered", "dropped", "in_flight", "delivered_bytes", "gratuitous_rrep"]
    + list(METRIC_NAMES)
)
ANALYTIC_COLUMNS = [
    "run_id", "sweep_parameter", "sweep_value", "n", "H", "T", "t", "p",
    "rreq", "rrep", "discovery", "hello", "aggregate",
]
SENSITIVITY_COLUMNS = [
    "run_id", "sweep_parameter", "sweep_value", "n", "H", "T", "t", "p", "mode",
    "dn", "dH", "dT", "dt", "dy_dn", "dy_dH", "dy_dT", "dy_dt", "dx", "dz", "dy",
    "actual_dy", "abs_error", "at_boundary",
]
VALIDATE_COLUMNS = [
    "rows", "cols", "n", "src", "dst", "hops", "analytic_rreq", "oracle_rreq",
    "simulated_rreq", "analytic_over_oracle", "simulated_over_oracle", "reachable",
]


class ExperimentError(RuntimeError):
    """A run failed; rows of earlier runs are already on disk."""


@dataclass
class RunRecord:
    experiment: str
    run_id: int
    inputs: Dict[str, Any]
    result: Any
    wall_clock: float = 0.0

    def row(self) -> Dict[str, Any]:
        return _row(self)


@dataclass(frozen=True)
class Task:
    run_id: int
    kind: str
    inputs: Dict[str, Any]
    trace_dir: Optional[str] = None


# -- single runs -----------------------------------------------------------

def simulate(config: ScenarioConfig, trace_path: Optional[str] = None) -> MetricsReport:
    sim = Simulator(config, trace=trace_path is not None)
    report = sim.run()
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            fh.writelines(line + "\n" for line in sim.trace)
    return report


def evaluate_analytic(spec: AnalyticSpec) -> OverheadBreakdown:
    params, cov, tiers, routes = spec.resolve()
    return aggregate_overhead(params, cov, tiers, routes)


def evaluate_sensitivity(spec: AnalyticSpec, deltas: Dict[str, Any]) -> Tuple[SensitivityReport, float]:
    """The first-order prediction and the realised change of the model."""
    params, cov, tiers, routes = spec.resolve()
    d = {k: float(deltas.get(k, 0.0)) for k in ("dn", "dH", "dT", "dt")}
    report = total_differential(params, cov, tiers, routes, mode=deltas.get("mode", "exact"), **d)
    moved = replace(params, n=params.n + d["dn"], H=params.H + d["dH"])
    y0 = overhead_function(params, cov, tiers, routes)
    y1 = overhead_function(moved, cov, tiers, shift_routes(routes, d["dT"], d["dt"]))
    return report, y1 - y0


def execute(task: Task) -> RunRecord:
    start = time.perf_counter()
    if task.kind in (SIMULATE, COMPARE):
        trace = os.path.join(task.trace_dir, f"run-{task.run_id:05d}.jsonl") if task.trace_dir else None
        result = simulate(task.inputs["config"], trace)
    elif task.kind == ANALYTIC:
        result = evaluate_analytic(task.inputs["spec"])
    elif task.kind == SENSITIVITY:
        result = evaluate_sensitivity(task.inputs["spec"], task.inputs["deltas"])
    else:
        raise ValueError(f"mode {task.kind!r} has no per-run executor")
    return RunRecord("", task.run_id, task.inputs, result, time.perf_counter() - start)


# -- planning --------------------------------------------------------------

def plan(e: Experiment, trace_dir: Optional[str] = None) -> List[Task]:
    values: Sequence[Any] = e.sweep.values if e.sweep else (None,)
    tasks: List[Task] = []
    rid = 0
    for value in values:
        if e.mode in (SIMULATE, COMPARE):
            scenario = apply_sweep_value(e.scenario, e.sweep.parameter, value) if e.sweep else dict(e.scenario)
            protocols = e.protocols if e.mode == COMPARE else (scenario.get("protocol", "AODV"),)
            for proto in protocols:
                for seed in e.seeds:
                    rid += 1
                    cfg = ScenarioConfig(seed=seed, **{**scenario, "protocol": proto})
                    inputs = {"config": cfg, "sweep_value": value, "sweep_parameter": e.sweep.parameter if e.sweep else None}
                    tasks.append(Task(rid, e.mode, inputs, trace_dir))
        elif e.mode in (ANALYTIC, SENSITIVITY):
            spec = e.analytic.with_value(e.sweep.parameter, float(value)) if e.sweep else e.analytic
            rid += 1
            inputs = {"spec": spec, "sweep_value": value, "sweep_parameter": e.sweep.parameter if e.sweep else None}
            if e.mode == SENSITIVITY:
                inputs["deltas"] = dict(e.sensitivity)
            tasks.append(Task(rid, e.mode, inputs))
        else:
            raise ValueError(f"mode {e.mode!r} is not a sweep mode; use validate_model")
    return tasks


# -- rows ------------------------------------------------------------------

def _cell(value) -> Any:
    # undefined metrics are written as empty cells
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    return value


def _row(rec: RunRecord) -> Dict[str, Any]:
    inp = rec.inputs
    base = {"run_id": rec.run_id, "sweep_parameter": inp.get("sweep_parameter"), "sweep_value": inp.get("sweep_value")}
    res = rec.result
    if isinstance(res, MetricsReport):
        cfg: ScenarioConfig = inp["config"]
        row = dict(base, protocol=cfg.protocol, seed=cfg.seed, nodes=cfg.nodes, speed=cfg.speed,
                   flow_count=len(cfg.flows) if cfg.flows else cfg.flow_count)
        row.update({f"tx_{k}": v for k, v in res.tx.items()})
        row.update(routing_tx=res.routing_transmissions, generated=res.generated, delivered=res.delivered,
                   dropped=res.dropped, in_flight=res.in_flight, delivered_bytes=res.delivered_bytes,
                   gratuitous_rrep=res.gratuitous_rrep)
        row.update(res.metrics())
        return row
    params = inp["spec"].resolve()[0]
    row = dict(base, n=params.n, H=params.H, T=params.T, t=params.t, p=params.p)
    if isinstance(res, OverheadBreakdown):
        row.update(asdict(res))
        return row
    report, actual = res
    row.update(asdict(report))
    row.update({k: inp["deltas"].get(k, 0.0) for k in ("dn", "dH", "dT", "dt")})
    row.update(actual_dy=actual, abs_error=abs(actual - report.dy))
    return row


def columns_for(mode: str) -> List[str]:
    return {SIMULATE: SIM_COLUMNS, COMPARE: SIM_COLUMNS, ANALYTIC: ANALYTIC_COLUMNS,
            SENSITIVITY: SENSITIVITY_COLUMNS, VALIDATE: VALIDATE_COLUMNS}[mode]


def _jsonable(value):
    if is_dataclass(value) and not isinstance(value, type):
        return {k: _jsonable(v) for k, v in asdict(value).items()}
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def record_json(rec: RunRecord) -> str:
    res = rec.result
    if isinstance(res, tuple):
        res = {"report": res[0], "actual_dy": res[1]}
    payload = {"experiment": rec.experiment, "run_id": rec.run_id, "inputs": rec.inputs,
               "result": res, "wall_clock": rec.wall_clock}
    return json.dumps(_jsonable(payload), sort_keys=True)


class RowWriter:
    """Appends rows to a CSV (and optional JSONL stream) as they arrive."""

    def __init__(self, columns: Sequence[str], path: Optional[str] = None, jsonl: Optional[str] = None):
        self.columns = list(columns)
        self._fh = open(path, "w", newline="") if path else None
        self._csv = csv.DictWriter(self._fh, self.columns, extrasaction="ignore") if self._fh else None
        if self._csv:
            self._csv.writeheader()
            self._fh.flush()
        self._jsonl = open(jsonl, "w") if jsonl else None

    def write(self, rec: RunRecord) -> None:
        if self._csv:
            self._csv.writerow({k: _cell(v) for k, v in rec.row().items()})
            self._fh.flush()
        if self._jsonl:
            self._jsonl.write(record_json(rec) + "\n")
            self._jsonl.flush()

    def close(self) -> None:
        for fh in (self._fh, self._jsonl):
            if fh:
                fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# -- execution -------------------------------------------------------------

def run_experiment(
    e: Experiment,
    writer: Optional[RowWriter] = None,
    trace_dir: Optional[str] = None,
) -> List[RunRecord]:
    """Run every task of ``e`` and return the records in run-id order."""
    tasks = plan(e, trace_dir)
    own = writer is None
    if own:
        writer = RowWriter(columns_for(e.mode), e.output, e.jsonl)
    records: Dict[int, RunRecord] = {}
    next_id = 1
    failed: Optional[Tuple[int, BaseException]] = None

    def flush():
        nonlocal next_id
        while next_id in records and (failed is None or next_id < failed[0]):
            writer.write(records[next_id])
            next_id += 1

    try:
        if e.jobs == 1:
            for task in tasks:
                try:
                    rec = execute(task)
                except Exception as exc:
                    failed = (task.run_id, exc)
                    break
                records[task.run_id] = replace(rec, experiment=e.name)
                flush()
        else:
            with ProcessPoolExecutor(max_workers=e.jobs) as pool:
                futures = {pool.submit(execute, t): t.run_id for t in tasks}
                for fut in as_completed(futures):
                    rid = futures[fut]
                    if fut.cancelled():
                        continue
                    exc = fut.exception()
                    if exc is not None:
                        if failed is None or rid < failed[0]:
                            failed = (rid, exc)
                        for other in futures:
                            other.cancel()
                    else:
                        records[rid] = replace(fut.result(), experiment=e.name)
                    flush()
        flush()
    finally:
        if own:
            writer.close()
    if failed is not None:
        rid, exc = failed
        raise ExperimentError(f"run {rid} of {e.name!r} failed: {exc}") from exc
    return [records[t.run_id] for t in tasks]


# -- summaries -------------------------------------------------------------

def _median(values: Iterable[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return statistics.median(vals) if vals else None


def summarize(records: Sequence[RunRecord]) -> List[Dict[str, Any]]:
    """Median of every metric per (sweep value, protocol)."""
    groups: Dict[Tuple, List[RunRecord]] = {}
    for rec in records:
        proto = rec.inputs["config"].protocol if "config" in rec.inputs else None
        groups.setdefault((rec.inputs.get("sweep_value"), proto), []).append(rec)
    out = []
    for (value, proto), recs in groups.items():
        rows = [r.row() for r in recs]
        if proto is not None:
            metrics = list(METRIC_NAMES) + ["routing_tx", "delivered", "generated"]
        else:
            metrics = [k for k in rows[0] if k not in ("run_id", "sweep_parameter", "sweep_value", "mode", "at_boundary")]
        summary = {"sweep_value": value, "protocol": proto, "runs": len(recs)}
        if proto is None:
            del summary["protocol"]
        summary.update({m: _median(row[m] for row in rows) for m in metrics})
        out.append(summary)
    return out


def rank(summary: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Protocols ordered best-first on each metric, per sweep value."""
    by_value: Dict[Any, List[Dict[str, Any]]] = {}
    for row in summary:
        by_value.setdefault(row["sweep_value"], []).append(row)
    out = []
    for value, rows in by_value.items():
        for metric in METRIC_NAMES:
            scored = [(r[metric], r["protocol"]) for r in rows if r[metric] is not None]
            scored.sort(key=lambda s: (-s[0], s[1]) if metric in HIGHER_IS_BETTER else (s[0], s[1]))
            out.append({"sweep_value": value, "metric": metric, "ranking": [p for _, p in scored],
                        "medians": [v for v, _ in scored]})
    return out


def format_table(rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
    if not rows:
        return "(no rows)"
    columns = list(columns or rows[0].keys())

    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.6g}"
        if isinstance(v, list):
            return ", ".join(fmt(x) for x in v)
        return str(v)

    cells = [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def write_table(path: str, rows: Sequence[Dict[str, Any]]) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, list(rows[0].keys()))
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(", ".join(map(str, v)) if isinstance(v, list) else v) for k, v in row.items()})


# -- analytical model vs. flood vs. simulator -------------------------------

@dataclass
class GridValidation:
    rows: int
    cols: int
    n: int
    src: int
    dst: int
    hops: Optional[int]
    analytic_rreq: Optional[float]
    oracle_rreq: int
    simulated_rreq: Optional[int]
    analytic_over_oracle: Optional[float]
    simulated_over_oracle: Optional[float]
    reachable: bool


@dataclass
class ValidationReport:
    grids: List[GridValidation] = field(default_factory=list)
    monotone_agreement: bool = False
    unreachable: List[Tuple[int, int]] = field(default_factory=list)


def simulated_discovery(g, src: int, dst: int, spacing: float, radio_range: float, ttl: int) -> int:
    """RREQ transmissions of one flooded discovery on the static grid ``g``."""
    alive = g.alive_nodes()
    index = {node: k for k, node in enumerate(alive)}
    positions = tuple((g.cell(v)[1] * spacing, g.cell(v)[0] * spacing) for v in alive)
    cfg = ScenarioConfig(
        seed=1,
        nodes=len(alive),
        arena=(max(1.0, g.cols * spacing), max(1.0, g.rows * spacing)),
        speed=0.0,
        radio_range=radio_range,
        duration=2.0,
        protocol="AODV",
        flows=(Flow(index[src], index[dst], rate=1.0, start=0.0, stop=0.5),),
        positions=positions,
        features=(("ers_enabled", False),),
        params=ProtocolParams(net_diameter=max(1, ttl)),
    )
    return simulate(cfg).tx["RREQ"]


def validate_model(spec: ValidateSpec) -> ValidationReport:
    """Analytical RREQ count, flood oracle and simulator side by side.

    No pass/fail: the models differ by construction. The agreement flag is
    set when all three counts grow together across the listed grids.
    """
    report = ValidationReport()
    cov = CoverageIndexTable(dict(spec.coverage))
    for rows, cols in spec.grids:
        g = build_grid(rows, cols, spec.spacing)
        for region in spec.blackouts:
            r = BlackoutRegion(*region)
            if r.row_hi < rows and r.col_hi < cols:
                g = apply_blackout(g, r)
        alive = g.alive_nodes()
        src, dst = alive[0], alive[-1]
        hops = hop_count(g, src, dst)
        ttl = g.diameter() if g.n > 1 else 0
        oracle = flood_oracle(g, src, ttl=ttl, dst=dst).transmissions
        if hops is None:
            report.unreachable.append((rows, cols))
            report.grids.append(GridValidation(rows, cols, g.n, src, dst, None, None, oracle, None, None, None, False))
            continue
        params = AnalyticalParams(n=max(2, g.n), H=hops, p=spec.p)
        analytic = rreq_overhead(params, cov, tier_neighbor_profile(g, src, params.tiers))
        simulated = simulated_discovery(g, src, dst, spec.spacing, spec.radio_range, ttl)
        report.grids.append(GridValidation(
            rows, cols, g.n, src, dst, hops, analytic, oracle, simulated,
            analytic / oracle if oracle else None, simulated / oracle if oracle else None, True,
        ))
    reachable = [v for v in report.grids if v.reachable]
    series = [[v.analytic_rreq for v in reachable], [v.oracle_rreq for v in reachable], [v.simulated_rreq for v in reachable]]
    report.monotone_agreement = len(reachable) >= 2 and all(
        all(b > a for a, b in zip(s, s[1:])) for s in series
    )
    return report
