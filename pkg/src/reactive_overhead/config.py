"""YAML experiment definitions.

An experiment file is a small tree of known keys; anything unrecognised is
rejected with the offending line number. Example::

    name: desk-mobility
    preset: desk
    seeds: [1, 2, 3]
    scenario:
      speed: 2.0
      params: {hello_interval: 1.0}
    sweep:
      parameter: speed
      values: [0.0, 2.0, 5.0]

Scenario keys mirror ``ScenarioConfig``; ``features`` overrides individual
protocol flags and ``params`` the protocol timers. The ``analytic`` section
feeds the closed-form model and the ``validate`` section the grid
cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from .grid import BlackoutRegion, apply_blackout, build_grid, hop_count, tier_neighbor_profile
from .overhead import DEFAULT_COVERAGE, AnalyticalParams, CoverageIndexTable, RouteDescriptor
from .protocols import PRESETS, ProtocolFeatureSet, ProtocolParams
from .sensitivity import EXACT, MODES
from .simulator import Flow, ScenarioConfig, grid_positions

ANALYTIC = "analytic"
SIMULATE = "simulate"
SENSITIVITY = "sensitivity"
COMPARE = "compare"
VALIDATE = "validate"
EXPERIMENT_MODES = (ANALYTIC, SIMULATE, SENSITIVITY, COMPARE, VALIDATE)

SCENARIO_PRESETS: Dict[str, Dict[str, Any]] = {
    # 50 nodes over a 1000 m x 1000 m square, walking speed, 2 Mbps, 512 B
    "full": dict(nodes=50, arena=(1000.0, 1000.0), speed=2.0, bandwidth=2e6, packet_size=512, duration=300.0),
    # the same setup shrunk for a laptop: 25 nodes at equal density
    "desk": dict(nodes=25, arena=(750.0, 750.0), speed=2.0, bandwidth=2e6, packet_size=512, duration=300.0),
}

TOP_KEYS = {
    "name", "mode", "preset", "seeds", "output", "jsonl", "jobs",
    "scenario", "protocols", "analytic", "sensitivity", "sweep", "validate",
}
SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)} - {"seed"} | {"grid"}
FEATURE_KEYS = {f.name for f in fields(ProtocolFeatureSet)} - {"name"}
PARAM_KEYS = {f.name for f in fields(ProtocolParams)}
FLOW_KEYS = {f.name for f in fields(Flow)}
ANALYTIC_KEYS = {"n", "H", "T", "t", "p", "coverage", "tiers", "grid", "routes"}
ANALYTIC_GRID_KEYS = {"rows", "cols", "src", "dst", "blackouts"}
ROUTE_KEYS = {"l", "T", "t"}
SENSITIVITY_KEYS = {"mode", "dn", "dH", "dT", "dt"}
SWEEP_KEYS = {"parameter", "values"}
VALIDATE_KEYS = {"sides", "grids", "spacing", "radio_range", "p", "coverage", "blackouts"}


class ConfigError(ValueError):
    """Invalid experiment definition; the message names the field and line."""


# -- line-aware YAML -------------------------------------------------------

def _index_lines(node, path=(), out=None) -> Dict[Tuple, int]:
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _index_lines(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _index_lines(v, path + (i,), out)
    return out


@dataclass
class Source:
    """Parsed YAML plus the line of every key, for error messages."""

    data: Any
    lines: Dict[Tuple, int] = field(default_factory=dict)
    filename: str = "<config>"

    def error(self, path: Sequence, message: str) -> ConfigError:
        path = tuple(path)
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        where = ".".join(str(p) for p in path) or "<root>"
        at = f"{self.filename}:{line}" if line else self.filename
        return ConfigError(f"{at}: {where}: {message}")


def parse_yaml(text: str, filename: str = "<config>") -> Source:
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
            data = loader.construct_document(node) if node is not None else {}
        finally:
            loader.dispose()
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{filename}{line}: malformed YAML: {getattr(exc, 'problem', exc)}") from None
    lines = _index_lines(node) if node is not None else {}
    return Source(data if data is not None else {}, lines, filename)


# -- field helpers ---------------------------------------------------------

def _mapping(src: Source, path, value, allowed) -> Dict[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise src.error(path, f"expected a mapping, got {type(value).__name__}")
    unknown = sorted(str(k) for k in value if k not in allowed)
    if unknown:
        raise src.error(tuple(path) + (unknown[0],), f"unknown key(s) {unknown}; allowed: {sorted(allowed)}")
    return dict(value)


def _number(src: Source, path, value, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise src.error(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise src.error(path, "must be finite")
    if positive and value <= 0:
        raise src.error(path, "must be > 0")
    if nonneg and value < 0:
        raise src.error(path, "must be >= 0")
    return value


def _integer(src: Source, path, value, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise src.error(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise src.error(path, f"must be >= {minimum}")
    return value


def _list(src: Source, path, value, nonempty=True) -> list:
    if not isinstance(value, list):
        raise src.error(path, f"expected a list, got {type(value).__name__}")
    if nonempty and not value:
        raise src.error(path, "must not be empty")
    return value


# -- scenario --------------------------------------------------------------

def _params(src: Source, path, value) -> ProtocolParams:
    raw = _mapping(src, path, value, PARAM_KEYS)
    if "ers_ttls" in raw:
        ttls = _list(src, tuple(path) + ("ers_ttls",), raw["ers_ttls"])
        raw["ers_ttls"] = tuple(ttls)
    try:
        return ProtocolParams(**raw)
    except (TypeError, ValueError) as exc:
        raise src.error(path, str(exc)) from None


def _features(src: Source, path, value) -> Tuple[Tuple[str, Any], ...]:
    raw = _mapping(src, path, value, FEATURE_KEYS)
    for k, v in raw.items():
        if k != "store" and not isinstance(v, bool):
            raise src.error(tuple(path) + (k,), f"expected true/false, got {v!r}")
    return tuple(sorted(raw.items()))


def _flows(src: Source, path, value) -> Tuple[Flow, ...]:
    out = []
    for i, item in enumerate(_list(src, path, value, nonempty=False)):
        p = tuple(path) + (i,)
        raw = _mapping(src, p, item, FLOW_KEYS)
        try:
            out.append(Flow(**raw))
        except (TypeError, ValueError) as exc:
            raise src.error(p, str(exc)) from None
    return tuple(out)


def scenario_kwargs(src: Source, value, path=("scenario",), base: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    raw = _mapping(src, path, value, SCENARIO_KEYS)
    kw: Dict[str, Any] = dict(base or {})
    for k, v in raw.items():
        p = tuple(path) + (k,)
        if k == "params":
            kw["params"] = _params(src, p, v)
        elif k == "features":
            kw["features"] = _features(src, p, v)
        elif k == "flows":
            kw["flows"] = _flows(src, p, v)
        elif k == "positions":
            pts = _list(src, p, v)
            kw["positions"] = tuple(
                (_number(src, p + (i,), xy[0]), _number(src, p + (i,), xy[1]))
                if isinstance(xy, list) and len(xy) == 2 else _bad_point(src, p + (i,), xy)
                for i, xy in enumerate(pts)
            )
        elif k == "grid":
            g = _mapping(src, p, v, {"rows", "cols", "spacing"})
            rows = _integer(src, p + ("rows",), g.get("rows"), 1)
            cols = _integer(src, p + ("cols",), g.get("cols"), 1)
            spacing = _number(src, p + ("spacing",), g.get("spacing", 200.0), positive=True)
            kw["positions"] = grid_positions(rows, cols, spacing)
            kw["nodes"] = rows * cols
            if "speed" not in raw:
                kw["speed"] = 0.0
        elif k == "arena":
            sides = _list(src, p, v)
            if len(sides) != 2:
                raise src.error(p, "arena needs [width, height]")
            kw["arena"] = (_number(src, p + (0,), sides[0], positive=True), _number(src, p + (1,), sides[1], positive=True))
        elif k == "protocol":
            if not isinstance(v, str) or v.upper() not in PRESETS:
                raise src.error(p, f"unknown protocol {v!r}; choose from {sorted(PRESETS)}")
            kw["protocol"] = v.upper()
        elif k == "preinstall_routes":
            if not isinstance(v, bool):
                raise src.error(p, f"expected true/false, got {v!r}")
            kw[k] = v
        elif k in ("nodes", "flow_count", "packet_size"):
            kw[k] = _integer(src, p, v, 0)
        else:
            kw[k] = _number(src, p, v)
    try:
        ScenarioConfig(seed=0, **kw)
    except (TypeError, ValueError) as exc:
        raise src.error(path, str(exc)) from None
    return kw


def _bad_point(src, path, value):
    raise src.error(path, f"expected [x, y], got {value!r}")


# -- analytic --------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticSpec:
    """Inputs of the closed-form model before tier profiles are derived.

    ``H = "auto"`` takes the hop count between the grid endpoints. Without
    explicit ``tiers`` or a ``grid``, ``n`` must be a perfect square and the
    model is evaluated corner to corner on the square grid of that size.
    """

    n: float = 25.0
    H: Any = "auto"
    T: float = 10.0
    t: float = 1.0
    p: float = 1.0
    coverage: Tuple[Tuple[int, float], ...] = tuple(sorted(DEFAULT_COVERAGE.items()))
    tiers: Optional[Tuple[float, ...]] = None
    grid: Optional[Tuple[int, int, int, int, Tuple[Tuple[int, int, int, int], ...]]] = None
    routes: Tuple[Tuple[int, Optional[float], Optional[float]], ...] = ()

    def with_value(self, name: str, value) -> "AnalyticSpec":
        if name not in ("n", "H", "T", "t", "p"):
            raise ValueError(f"cannot sweep analytic parameter {name!r}")
        return replace(self, **{name: value})

    def resolve(self):
        """Return ``(params, coverage, tiers, routes)`` ready for the model."""
        cov = CoverageIndexTable(dict(self.coverage))
        n, H = self.n, self.H
        tiers = self.tiers
        if self.grid is not None:
            rows, cols, src, dst, blackouts = self.grid
            g = build_grid(rows, cols)
            for region in blackouts:
                g = apply_blackout(g, BlackoutRegion(*region))
            if dst < 0:
                dst = g.corner("bottom-right")
            hops = hop_count(g, src, dst)
            if hops is None:
                raise ValueError(f"grid endpoints {src} and {dst} are disconnected")
            n = g.n
            H = hops if H == "auto" else H
            if tiers is None:
                tiers = tier_neighbor_profile(g, src, max(1, int(math.floor(float(H) + 0.5))))
        elif tiers is None:
            side = math.isqrt(int(n))
            if side * side != n or side < 2:
                raise ValueError(f"n={n} is not a square grid size; give tiers or a grid")
            g = build_grid(side, side)
            H = 2 * side - 2 if H == "auto" else H
            tiers = tier_neighbor_profile(g, 0, max(1, int(math.floor(float(H) + 0.5))))
        elif H == "auto":
            raise ValueError("H = auto needs a grid")
        params = AnalyticalParams(n=float(n), H=float(H), T=self.T, t=self.t, p=self.p)
        if self.routes:
            routes = [RouteDescriptor(l, self.T if T is None else T, self.t if t is None else t) for l, T, t in self.routes]
        else:
            routes = [RouteDescriptor(params.tiers, self.T, self.t)]
        return params, cov, list(tiers), routes


def analytic_spec(src: Source, value, path=("analytic",)) -> AnalyticSpec:
    raw = _mapping(src, path, value, ANALYTIC_KEYS)
    kw: Dict[str, Any] = {}
    for k in ("n", "T", "t", "p"):
        if k in raw:
            kw[k] = _number(src, tuple(path) + (k,), raw[k])
    if "H" in raw:
        kw["H"] = raw["H"] if raw["H"] == "auto" else _number(src, tuple(path) + ("H",), raw["H"])
    if "coverage" in raw:
        p = tuple(path) + ("coverage",)
        cov = _mapping(src, p, raw["coverage"], {2, 3, 4, "2", "3", "4"})
        table = {int(k): _number(src, p + (k,), v) for k, v in cov.items()}
        try:
            CoverageIndexTable(table)
        except ValueError as exc:
            raise src.error(p, str(exc)) from None
        kw["coverage"] = tuple(sorted(table.items()))
    if "tiers" in raw:
        p = tuple(path) + ("tiers",)
        kw["tiers"] = tuple(_number(src, p + (i,), v, nonneg=True) for i, v in enumerate(_list(src, p, raw["tiers"], False)))
    if "grid" in raw:
        p = tuple(path) + ("grid",)
        g = _mapping(src, p, raw["grid"], ANALYTIC_GRID_KEYS)
        rows = _integer(src, p + ("rows",), g.get("rows"), 1)
        cols = _integer(src, p + ("cols",), g.get("cols"), 1)
        s = _integer(src, p + ("src",), g.get("src", 0), 0)
        d = _integer(src, p + ("dst",), g.get("dst", -1), -1)
        kw["grid"] = (rows, cols, s, d, _blackouts(src, p + ("blackouts",), g.get("blackouts", [])))
    if "routes" in raw:
        p = tuple(path) + ("routes",)
        routes = []
        for i, item in enumerate(_list(src, p, raw["routes"], False)):
            r = _mapping(src, p + (i,), item, ROUTE_KEYS)
            l = _integer(src, p + (i, "l"), r.get("l"), 1)
            T = _number(src, p + (i, "T"), r["T"], positive=True) if "T" in r else None
            t = _number(src, p + (i, "t"), r["t"], positive=True) if "t" in r else None
            routes.append((l, T, t))
        kw["routes"] = tuple(routes)
    spec = AnalyticSpec(**kw)
    try:
        spec.resolve()
    except ValueError as exc:
        raise src.error(path, str(exc)) from None
    return spec


def _blackouts(src: Source, path, value) -> Tuple[Tuple[int, int, int, int], ...]:
    out = []
    for i, item in enumerate(_list(src, path, value, False)):
        p = tuple(path) + (i,)
        if not (isinstance(item, list) and len(item) == 4):
            raise src.error(p, "blackout needs [row_lo, row_hi, col_lo, col_hi]")
        out.append(tuple(_integer(src, p + (j,), v, 0) for j, v in enumerate(item)))
    return tuple(out)


# -- experiment ------------------------------------------------------------

@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: Tuple[Any, ...]


@dataclass(frozen=True)
class ValidateSpec:
    grids: Tuple[Tuple[int, int], ...] = ((3, 3), (4, 4), (5, 5), (6, 6))
    spacing: float = 200.0
    radio_range: float = 250.0
    p: float = 1.0
    coverage: Tuple[Tuple[int, float], ...] = tuple(sorted(DEFAULT_COVERAGE.items()))
    blackouts: Tuple[Tuple[int, int, int, int], ...] = ()


@dataclass(frozen=True)
class Experiment:
    name: str
    mode: str
    scenario: Dict[str, Any] = field(default_factory=dict)
    analytic: AnalyticSpec = field(default_factory=AnalyticSpec)
    sensitivity: Dict[str, Any] = field(default_factory=lambda: {"mode": EXACT, "dn": 1.0, "dH": 1.0, "dT": 1.0, "dt": 0.1})
    validate: ValidateSpec = field(default_factory=ValidateSpec)
    sweep: Optional[Sweep] = None
    seeds: Tuple[int, ...] = (1,)
    protocols: Tuple[str, ...] = ("AODV", "DSR", "DYMO")
    output: Optional[str] = None
    jsonl: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in EXPERIMENT_MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {EXPERIMENT_MODES}")
        if self.mode in (SIMULATE, COMPARE) and not self.seeds:
            raise ValueError("simulation needs at least one seed")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.sweep is not None:
            if not self.sweep.values:
                raise ValueError("sweep values must not be empty")

    def base_config(self, seed: int) -> ScenarioConfig:
        return ScenarioConfig(seed=seed, **self.scenario)


def _sweep(src: Source, value, mode: str, path=("sweep",)) -> Sweep:
    raw = _mapping(src, path, value, SWEEP_KEYS)
    name = raw.get("parameter")
    if not isinstance(name, str):
        raise src.error(tuple(path) + ("parameter",), "sweep needs a parameter name")
    values = _list(src, tuple(path) + ("values",), raw.get("values"))
    vp = tuple(path) + ("values",)
    if mode in (ANALYTIC, SENSITIVITY):
        if name not in ("n", "H", "T", "t", "p"):
            raise src.error(tuple(path) + ("parameter",), f"analytic sweeps take n, H, T, t or p, not {name!r}")
        vals = tuple(_number(src, vp + (i,), v) for i, v in enumerate(values))
    elif mode in (SIMULATE, COMPARE):
        head, _, tail = name.partition(".")
        ok = (head in SCENARIO_KEYS - {"params", "features", "grid"} and not tail) or (
            head == "params" and tail in PARAM_KEYS) or (head == "features" and tail in FEATURE_KEYS)
        if not ok:
            raise src.error(tuple(path) + ("parameter",), f"unknown scenario parameter {name!r}")
        vals = tuple(values)
        for i, v in enumerate(vals):
            if isinstance(v, float) and not math.isfinite(v):
                raise src.error(vp + (i,), "must be finite")
    else:
        raise src.error(path, f"mode {mode!r} does not sweep")
    return Sweep(name, vals)


def apply_sweep_value(scenario: Dict[str, Any], parameter: str, value) -> Dict[str, Any]:
    """Return scenario kwargs with ``parameter`` set to ``value``."""
    kw = dict(scenario)
    head, _, tail = parameter.partition(".")
    if head == "params":
        kw["params"] = replace(kw.get("params", ProtocolParams()), **{tail: value})
    elif head == "features":
        feats = dict(kw.get("features", ()))
        feats[tail] = value
        kw["features"] = tuple(sorted(feats.items()))
    elif head == "arena":
        kw["arena"] = tuple(value) if isinstance(value, (list, tuple)) else (float(value), float(value))
    else:
        kw[head] = value
    return kw


def experiment_from_source(src: Source, mode: Optional[str] = None) -> Experiment:
    top = _mapping(src, (), src.data, TOP_KEYS)
    file_mode = top.get("mode")
    if file_mode is not None and file_mode not in EXPERIMENT_MODES:
        raise src.error(("mode",), f"unknown mode {file_mode!r}; choose from {list(EXPERIMENT_MODES)}")
    if mode is not None and file_mode is not None and mode != file_mode:
        raise src.error(("mode",), f"file is a {file_mode!r} experiment, not {mode!r}")
    mode = mode or file_mode
    if mode is None:
        raise src.error(("mode",), "mode is required")
    kw: Dict[str, Any] = {"mode": mode, "name": str(top.get("name", mode))}

    preset_name = top.get("preset", "desk")
    if preset_name not in SCENARIO_PRESETS:
        raise src.error(("preset",), f"unknown preset {preset_name!r}; choose from {sorted(SCENARIO_PRESETS)}")
    kw["scenario"] = scenario_kwargs(src, top.get("scenario"), base=SCENARIO_PRESETS[preset_name])

    if "seeds" in top:
        seeds = _list(src, ("seeds",), top["seeds"])
        kw["seeds"] = tuple(_integer(src, ("seeds", i), s) for i, s in enumerate(seeds))
    if "protocols" in top:
        protos = _list(src, ("protocols",), top["protocols"])
        for i, p in enumerate(protos):
            if not isinstance(p, str) or p.upper() not in PRESETS:
                raise src.error(("protocols", i), f"unknown protocol {p!r}")
        kw["protocols"] = tuple(p.upper() for p in protos)
    if "analytic" in top:
        kw["analytic"] = analytic_spec(src, top["analytic"])
    if "sensitivity" in top:
        raw = _mapping(src, ("sensitivity",), top["sensitivity"], SENSITIVITY_KEYS)
        sens = dict(Experiment.__dataclass_fields__["sensitivity"].default_factory())
        for k, v in raw.items():
            if k == "mode":
                if v not in MODES:
                    raise src.error(("sensitivity", k), f"unknown mode {v!r}; choose from {list(MODES)}")
                sens[k] = v
            else:
                sens[k] = _number(src, ("sensitivity", k), v)
        kw["sensitivity"] = sens
    if "validate" in top:
        raw = _mapping(src, ("validate",), top["validate"], VALIDATE_KEYS)
        vk: Dict[str, Any] = {}
        grids = []
        for i, s in enumerate(_list(src, ("validate", "sides"), raw["sides"]) if "sides" in raw else []):
            s = _integer(src, ("validate", "sides", i), s, 1)
            grids.append((s, s))
        for i, rc in enumerate(_list(src, ("validate", "grids"), raw["grids"]) if "grids" in raw else []):
            if not (isinstance(rc, list) and len(rc) == 2):
                raise src.error(("validate", "grids", i), "grid needs [rows, cols]")
            grids.append((_integer(src, ("validate", "grids", i, 0), rc[0], 1), _integer(src, ("validate", "grids", i, 1), rc[1], 1)))
        if grids:
            vk["grids"] = tuple(grids)
        for k in ("spacing", "radio_range"):
            if k in raw:
                vk[k] = _number(src, ("validate", k), raw[k], positive=True)
        if "p" in raw:
            vk["p"] = _number(src, ("validate", "p"), raw["p"])
        if "coverage" in raw:
            vk["coverage"] = analytic_spec(src, {"coverage": raw["coverage"], "n": 4}, ("validate",)).coverage
        if "blackouts" in raw:
            vk["blackouts"] = _blackouts(src, ("validate", "blackouts"), raw["blackouts"])
        kw["validate"] = ValidateSpec(**vk)
    if "sweep" in top:
        sweep = kw["sweep"] = _sweep(src, top["sweep"], mode)
        for i, v in enumerate(sweep.values):
            try:
                if mode in (SIMULATE, COMPARE):
                    ScenarioConfig(seed=0, **apply_sweep_value(kw["scenario"], sweep.parameter, v))
                elif mode in (ANALYTIC, SENSITIVITY):
                    kw.get("analytic", AnalyticSpec()).with_value(sweep.parameter, v).resolve()
            except (TypeError, ValueError) as exc:
                raise src.error(("sweep", "values", i), str(exc)) from None
    if "output" in top:
        kw["output"] = str(top["output"])
    if "jsonl" in top:
        kw["jsonl"] = str(top["jsonl"])
    if "jobs" in top:
        kw["jobs"] = _integer(src, ("jobs",), top["jobs"], 1)
    try:
        return Experiment(**kw)
    except ValueError as exc:
        raise src.error((), str(exc)) from None


def load_experiment(path: Optional[str], mode: Optional[str] = None) -> Experiment:
    """Read an experiment file; ``None`` gives the desk preset defaults."""
    if path is None:
        return experiment_from_source(Source({"mode": mode}), mode)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return experiment_from_source(parse_yaml(text, path), mode)


def loads_experiment(text: str, mode: Optional[str] = None) -> Experiment:
    return experiment_from_source(parse_yaml(text), mode)
