"""Deterministic discrete-event simulator for the reactive protocol agents.

The radio is a unit disk with an idealized MAC: a transmission occupies the
sender's interface for ``size * 8 / bandwidth`` seconds, arrives after a
fixed propagation delay, and never collides. Broadcasts get a small seeded
jitter to break flood synchronization. All randomness flows through one
``random.Random`` per run, so a (config, seed) pair always replays the same
event trace.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .metrics import MetricsReport
from .mobility import MobileNode, move, random_point
from .packets import DATA_SIZE, Kind, Packet, data_packet
from .protocols import (
    ROUTE_CACHE,
    CachedRoute,
    Deliver,
    Drop,
    Note,
    ProtocolFeatureSet,
    ProtocolParams,
    RouteEntry,
    RoutingAgent,
    Send,
    Timer,
    preset,
)

PROPAGATION_DELAY = 1e-6

PACKET_DELIVERY = "packet-delivery"
OVERHEAR = "overhear"
TIMER_EXPIRY = "timer-expiry"
TRAFFIC = "traffic-generation"
MOBILITY = "mobility-update"


@dataclass(frozen=True)
class Flow:
    src: int
    dst: int
    rate: float = 4.0
    start: float = 0.0
    stop: Optional[float] = None

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("flow endpoints must differ")
        if self.rate <= 0:
            raise ValueError("flow rate must be > 0")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    nodes: int = 25
    arena: Tuple[float, float] = (750.0, 750.0)
    speed: float = 2.0
    bandwidth: float = 2e6
    radio_range: float = 250.0
    duration: float = 300.0
    protocol: str = "AODV"
    flow_count: int = 10
    flow_rate: float = 4.0
    packet_size: int = DATA_SIZE
    flow_start_window: float = 10.0
    drain: float = 5.0
    flows: Tuple[Flow, ...] = ()
    positions: Tuple[Tuple[float, float], ...] = ()
    mobility_step: float = 1.0
    jitter: float = 0.001
    preinstall_routes: bool = False
    features: Tuple[Tuple[str, bool], ...] = ()
    params: ProtocolParams = field(default_factory=ProtocolParams)

    def __post_init__(self):
        if not isinstance(self.seed, int):
            raise ValueError("seed must be an integer")
        for name in ("nodes", "bandwidth", "radio_range", "duration", "packet_size", "mobility_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.nodes < 2:
            raise ValueError("need at least two nodes")
        if self.arena[0] <= 0 or self.arena[1] <= 0:
            raise ValueError("arena sides must be > 0")
        for name in ("speed", "jitter", "drain", "flow_start_window"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.positions and len(self.positions) != self.nodes:
            raise ValueError(f"{len(self.positions)} positions given for {self.nodes} nodes")
        for f in self.flows:
            if not (0 <= f.src < self.nodes and 0 <= f.dst < self.nodes):
                raise ValueError(f"flow {f} references a node outside 0..{self.nodes - 1}")
        preset(self.protocol)

    def feature_set(self) -> ProtocolFeatureSet:
        return preset(self.protocol).with_overrides(**dict(self.features))


class SimEvent(NamedTuple):
    time: float
    sequence: int
    kind: str
    node: int
    payload: object


class EventQueue:
    """Min-heap of events ordered by (time, insertion sequence)."""

    def __init__(self):
        self._heap: List[SimEvent] = []
        self._seq = 0
        self.now = 0.0

    def __len__(self):
        return len(self._heap)

    def push(self, time: float, kind: str, node: int, payload=None) -> SimEvent:
        if time < self.now:
            raise ValueError(f"event at {time} scheduled in the past (now={self.now})")
        ev = SimEvent(time, self._seq, kind, node, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> SimEvent:
        ev = heapq.heappop(self._heap)
        self.now = ev.time
        return ev

    def peek_time(self) -> float:
        return self._heap[0].time if self._heap else math.inf

    def events(self) -> List[SimEvent]:
        return list(self._heap)


def grid_positions(rows: int, cols: int, spacing: float) -> Tuple[Tuple[float, float], ...]:
    """Row-major lattice positions, matching the node ids of ``grid``."""
    return tuple((c * spacing, r * spacing) for r in range(rows) for c in range(cols))


class Simulator:
    def __init__(self, config: ScenarioConfig, features: ProtocolFeatureSet | None = None, trace: bool = False):
        self.config = config
        self.features = features or config.feature_set()
        self.rng = random.Random(config.seed)
        self.queue = EventQueue()
        self.trace: Optional[List[str]] = [] if trace else None
        self.report = MetricsReport(duration=config.duration)
        self.live: Dict[int, Packet] = {}
        self._uid = 0
        self._busy: Dict[int, float] = {}
        self._adjacency: Optional[List[List[int]]] = None
        self.nodes = self._place_nodes()
        self.agents = [RoutingAgent(i, self.features, config.params) for i in range(config.nodes)]
        self.flows = self._make_flows()

    # -- setup -------------------------------------------------------------

    def _place_nodes(self) -> List[MobileNode]:
        cfg = self.config
        out = []
        for i in range(cfg.nodes):
            if cfg.positions:
                x, y = cfg.positions[i]
            else:
                x, y = random_point(self.rng, cfg.arena)
            wx, wy = random_point(self.rng, cfg.arena) if cfg.speed > 0 else (x, y)
            out.append(MobileNode(i, x, y, wx, wy, cfg.speed, cfg.radio_range))
        return out

    def _make_flows(self) -> List[Flow]:
        cfg = self.config
        if cfg.flows:
            return list(cfg.flows)
        pairs = [(s, d) for s in range(cfg.nodes) for d in range(cfg.nodes) if s != d]
        chosen = self.rng.sample(pairs, min(cfg.flow_count, len(pairs)))
        stop = max(0.0, cfg.duration - cfg.drain)
        return [
            Flow(s, d, cfg.flow_rate, self.rng.uniform(0.0, min(cfg.flow_start_window, stop)), stop)
            for s, d in chosen
        ]

    # -- radio -------------------------------------------------------------

    def adjacency(self) -> List[List[int]]:
        if self._adjacency is None:
            r2 = self.config.radio_range ** 2
            pos = [(n.x, n.y) for n in self.nodes]
            adj = [[] for _ in pos]
            for i, (xi, yi) in enumerate(pos):
                for j in range(i + 1, len(pos)):
                    xj, yj = pos[j]
                    if (xi - xj) ** 2 + (yi - yj) ** 2 <= r2:
                        adj[i].append(j)
                        adj[j].append(i)
            self._adjacency = adj
        return self._adjacency

    def receivers(self, sender: int) -> List[int]:
        """Nodes inside the sender's radio range right now."""
        return self.adjacency()[sender]

    def tx_delay(self, packet: Packet) -> float:
        return packet.size * 8 / self.config.bandwidth + PROPAGATION_DELAY

    def shortest_path(self, src: int, dst: int) -> Optional[List[int]]:
        adj = self.adjacency()
        prev = {src: None}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            if u == dst:
                break
            for v in adj[u]:
                if v not in prev:
                    prev[v] = u
                    queue.append(v)
        if dst not in prev:
            return None
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        return path[::-1]

    # -- main loop ---------------------------------------------------------

    def run(self) -> MetricsReport:
        cfg = self.config
        q = self.queue
        if cfg.preinstall_routes:
            self._preinstall()
        for i, flow in enumerate(self.flows):
            q.push(flow.start, TRAFFIC, flow.src, i)
        if self.features.periodic_hello:
            for agent in self.agents:
                q.push(self.rng.uniform(0.0, cfg.params.hello_interval), TIMER_EXPIRY, agent.id, ("hello", None, None))
        if cfg.speed > 0:
            q.push(cfg.mobility_step, MOBILITY, -1, None)

        while q.peek_time() <= cfg.duration:
            ev = q.pop()
            if self.trace is not None:
                self.trace.append(self._trace_line(ev))
            now = ev.time
            if ev.kind == PACKET_DELIVERY:
                pkt, sender = ev.payload
                self._apply(ev.node, self.agents[ev.node].on_receive(pkt, sender, now))
            elif ev.kind == OVERHEAR:
                pkt, sender = ev.payload
                self._apply(ev.node, self.agents[ev.node].on_overhear(pkt, sender, now))
            elif ev.kind == TIMER_EXPIRY:
                name, key, token = ev.payload
                self._apply(ev.node, self.agents[ev.node].on_timer(name, key, token, now))
            elif ev.kind == TRAFFIC:
                self._generate(ev.payload, now)
            elif ev.kind == MOBILITY:
                self.nodes = [move(n, cfg.mobility_step, self.rng, cfg.arena) for n in self.nodes]
                self._adjacency = None
                q.push(now + cfg.mobility_step, MOBILITY, -1, None)

        self.report.in_flight = len(self.live)
        self.report.finalize()
        self.report.check()
        return self.report

    def _generate(self, index: int, now: float) -> None:
        flow = self.flows[index]
        self._uid += 1
        pkt = data_packet(flow.src, flow.dst, self._uid, now, self.config.packet_size)
        self.live[pkt.uid] = pkt
        self.report.generated += 1
        self._apply(flow.src, self.agents[flow.src].send_data(pkt, now))
        nxt = now + 1.0 / flow.rate
        stop = self.config.duration if flow.stop is None else flow.stop
        if nxt < stop:
            self.queue.push(nxt, TRAFFIC, flow.src, index)

    def _apply(self, node: int, actions) -> None:
        now = self.queue.now
        for a in actions:
            if isinstance(a, Send):
                self._transmit(node, a)
            elif isinstance(a, Timer):
                self.queue.push(now + a.delay, TIMER_EXPIRY, node, (a.name, a.key, a.token))
            elif isinstance(a, Deliver):
                self._deliver(a.packet, now)
            elif isinstance(a, Drop):
                self._drop(a.packet, a.reason)
            elif isinstance(a, Note):
                self.report.notes[a.name] = self.report.notes.get(a.name, 0) + 1
            else:
                raise TypeError(f"unknown action {a!r}")

    def _transmit(self, node: int, send: Send) -> None:
        pkt = send.packet
        rep = self.report
        rep.tx[pkt.kind.value] += 1
        if pkt.kind is Kind.RREP and pkt.gratuitous:
            rep.gratuitous_rrep += 1
        now = self.queue.now
        start = now
        if send.to is None and self.config.jitter > 0:
            start += self.rng.uniform(0.0, self.config.jitter)
        start = max(start, self._busy.get(node, 0.0))
        serialization = pkt.size * 8 / self.config.bandwidth
        self._busy[node] = start + serialization
        arrival = start + serialization + PROPAGATION_DELAY
        in_range = self.receivers(node)
        if send.to is None:
            for r in in_range:
                self.queue.push(arrival, PACKET_DELIVERY, r, (pkt, node))
            return
        if send.to in in_range:
            self.queue.push(arrival, PACKET_DELIVERY, send.to, (pkt, node))
        elif pkt.kind is Kind.DATA and not send.retain:
            self._drop(pkt, "link-loss")
        for r in in_range:
            if r != send.to and self.agents[r].f.promiscuous:
                self.queue.push(arrival, OVERHEAR, r, (pkt, node))

    def _deliver(self, pkt: Packet, now: float) -> None:
        if self.live.pop(pkt.uid, None) is None:
            self.report.notes["duplicate-delivery"] = self.report.notes.get("duplicate-delivery", 0) + 1
            return
        self.report.delivered += 1
        self.report.delivered_bytes += pkt.payload
        self.report.latencies.append(now - pkt.created)

    def _drop(self, pkt: Packet, reason: str) -> None:
        if self.live.pop(pkt.uid, None) is None:
            return
        self.report.dropped += 1
        self.report.drop_reasons[reason] = self.report.drop_reasons.get(reason, 0) + 1

    def _preinstall(self) -> None:
        for flow in self.flows:
            path = self.shortest_path(flow.src, flow.dst)
            if path is None:
                continue
            if self.features.store == ROUTE_CACHE:
                self.agents[flow.src].cache[flow.dst] = [CachedRoute(tuple(path), math.inf)]
                continue
            for k, node in enumerate(path[:-1]):
                self.agents[node].table[flow.dst] = RouteEntry(
                    flow.dst, path[k + 1], len(path) - 1 - k, math.inf
                )

    # -- introspection -----------------------------------------------------

    def custody(self) -> List[int]:
        """uids of every DATA copy held by an agent or still on the air."""
        uids = []
        for agent in self.agents:
            uids += agent.custody()
        for ev in self.queue.events():
            if ev.kind == PACKET_DELIVERY and ev.payload[0].kind is Kind.DATA:
                uids.append(ev.payload[0].uid)
        return uids

    def _trace_line(self, ev: SimEvent) -> str:
        rec = {"t": round(ev.time, 12), "seq": ev.sequence, "kind": ev.kind, "node": ev.node}
        if ev.kind in (PACKET_DELIVERY, OVERHEAR):
            pkt, sender = ev.payload
            rec.update(pkt=pkt.kind.value, origin=pkt.origin, dst=pkt.dst, uid=pkt.uid, sender=sender)
        elif ev.kind == TIMER_EXPIRY:
            rec["timer"] = ev.payload[0]
        elif ev.kind == TRAFFIC:
            rec["flow"] = ev.payload
        return json.dumps(rec, sort_keys=True)


def run(config: ScenarioConfig, protocol: ProtocolFeatureSet | None = None, trace: bool = False) -> MetricsReport:
    return Simulator(config, protocol, trace).run()
