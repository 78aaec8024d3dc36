"""Reactive routing control planes (AODV, DSR, DYMO) as one state machine.

Behaviour is selected by a :class:`ProtocolFeatureSet`. Every handler of
:class:`RoutingAgent` returns a list of actions (transmissions, timers,
deliveries, drops) and never touches the event loop directly, so agents
can be driven by hand in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .packets import Kind, Packet

ROUTING_TABLE = "routing-table"
ROUTE_CACHE = "route-cache"

INF = math.inf


@dataclass(frozen=True)
class ProtocolFeatureSet:
    name: str
    source_routing: bool = False
    store: str = ROUTING_TABLE
    multiple_routes: bool = False
    gratuitous_rrep: bool = False
    periodic_hello: bool = False
    ack_link_monitor: bool = False
    promiscuous: bool = False
    local_repair: bool = False
    check_store_before_discovery: bool = True
    ers_enabled: bool = True

    def __post_init__(self):
        if self.store not in (ROUTING_TABLE, ROUTE_CACHE):
            raise ValueError(f"unknown route store {self.store!r}")
        if self.store == ROUTE_CACHE and not self.source_routing:
            raise ValueError("a route cache holds source routes; source_routing must be set")

    @property
    def carries_source_route(self) -> bool:
        """DATA is source-routed only when full paths are stored."""
        return self.store == ROUTE_CACHE

    @property
    def refresh_on_use(self) -> bool:
        # without a link monitor a route is only trusted for its timeout
        return self.periodic_hello or self.ack_link_monitor

    def with_overrides(self, **changes) -> "ProtocolFeatureSet":
        known = {f.name for f in fields(self)}
        unknown = set(changes) - known
        if unknown:
            raise ValueError(f"unknown feature(s): {sorted(unknown)}")
        return replace(self, **changes)


AODV = ProtocolFeatureSet(
    name="AODV",
    source_routing=False,
    store=ROUTING_TABLE,
    multiple_routes=False,
    gratuitous_rrep=True,
    periodic_hello=True,
    local_repair=True,
    check_store_before_discovery=True,
)

DSR = ProtocolFeatureSet(
    name="DSR",
    source_routing=True,
    store=ROUTE_CACHE,
    multiple_routes=True,
    gratuitous_rrep=True,
    ack_link_monitor=True,
    promiscuous=True,
    check_store_before_discovery=True,
)

DYMO = ProtocolFeatureSet(
    name="DYMO",
    source_routing=True,
    store=ROUTING_TABLE,
    gratuitous_rrep=False,
    check_store_before_discovery=False,
)

PRESETS = {"AODV": AODV, "DSR": DSR, "DYMO": DYMO}


def preset(name: str) -> ProtocolFeatureSet:
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class ProtocolParams:
    """Timers and limits; the protocol definitions leave all of these open."""

    hello_interval: float = 1.0
    hello_loss: int = 2
    route_timeout: float = 10.0
    ers_ttls: Tuple[Union[int, str], ...] = (1, 3, 7, "diameter")
    backoff_base: float = 0.5
    max_retries: int = 3
    net_diameter: int = 16
    ack_timeout: float = 0.05
    ack_holdoff: float = 1.0
    repair_max_hops: int = 3
    send_buffer: int = 64
    dsr_multiple_replies: int = 3
    cache_paths: int = 3

    def __post_init__(self):
        for name in ("hello_interval", "route_timeout", "backoff_base", "ack_timeout", "ack_holdoff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_retries < 0 or self.net_diameter < 1:
            raise ValueError("max_retries must be >= 0 and net_diameter >= 1")
        if not self.ers_ttls:
            raise ValueError("ERS ttl sequence must not be empty")
        fixed = [int(t) for t in self.ers_ttls if t != "diameter"]
        if any(b <= a for a, b in zip(fixed, fixed[1:])) or any(t < 0 for t in fixed):
            raise ValueError(f"ERS ttl sequence must be strictly increasing, got {self.ers_ttls}")
        if "diameter" in self.ers_ttls[:-1]:
            raise ValueError("'diameter' may only close the ERS ttl sequence")

    def ttl_schedule(self) -> List[int]:
        """Ring TTLs; rings at or beyond the network diameter collapse into it."""
        out = []
        for t in self.ers_ttls:
            t = self.net_diameter if t == "diameter" else min(int(t), self.net_diameter)
            if not out or t > out[-1]:
                out.append(t)
        return out


# -- actions ---------------------------------------------------------------

@dataclass(frozen=True)
class Send:
    packet: Packet
    to: Optional[int] = None  # None = broadcast
    retain: bool = False  # sender keeps a copy pending confirmation


@dataclass(frozen=True)
class Timer:
    delay: float
    name: str
    key: object = None
    token: object = None


@dataclass(frozen=True)
class Deliver:
    packet: Packet


@dataclass(frozen=True)
class Drop:
    packet: Packet
    reason: str


@dataclass(frozen=True)
class Note:
    name: str


Action = Union[Send, Timer, Deliver, Drop, Note]


# -- state -----------------------------------------------------------------

@dataclass
class RouteEntry:
    dst: int
    next_hop: int
    hops: int
    expiry: float
    seq: int = 0
    valid: bool = True

    def usable(self, now: float) -> bool:
        return self.valid and self.expiry > now


@dataclass
class CachedRoute:
    path: Tuple[int, ...]  # starts at the owner, ends at the destination
    expiry: float

    @property
    def hops(self) -> int:
        return len(self.path) - 1


@dataclass
class Discovery:
    attempt: int
    rreq_id: int


@dataclass
class Repair:
    token: int
    buffer: List[Packet] = field(default_factory=list)


class LoopError(RuntimeError):
    pass


class RoutingAgent:
    """Control plane of a single node."""

    def __init__(self, node_id: int, features: ProtocolFeatureSet, params: ProtocolParams | None = None):
        self.id = node_id
        self.f = features
        self.p = params or ProtocolParams()
        self.seq = 0
        self.rreq_counter = 0
        self.seen: set = set()
        self.replies: Dict[Tuple[int, int], int] = {}
        self.table: Dict[int, RouteEntry] = {}
        self.cache: Dict[int, List[CachedRoute]] = {}
        self.buffer: Dict[int, List[Packet]] = {}
        self.discovery: Dict[int, Discovery] = {}
        self.repairs: Dict[int, Repair] = {}
        self.last_heard: Dict[int, float] = {}
        self.active_links: Dict[int, float] = {}
        self.precursors: Dict[int, Dict[int, int]] = {}
        self.pending_acks: Dict[Tuple[int, int], Tuple[Packet, int]] = {}
        self.confirmed: Dict[int, float] = {}

    # -- route store -------------------------------------------------------

    def _install(self, dst: int, next_hop: int, hops: int, now: float, seq: int = 0) -> bool:
        if dst == self.id:
            return False
        if next_hop == self.id:
            raise LoopError(f"node {self.id} would route to {dst} via itself")
        cur = self.table.get(dst)
        lifetime = now + self.p.route_timeout
        if cur is not None and cur.usable(now):
            newer = seq > cur.seq
            better = seq == cur.seq and hops < cur.hops
            if not (newer or better):
                return False
        self.table[dst] = RouteEntry(dst, next_hop, hops, lifetime, seq, True)
        return True

    def _cache_path(self, path: Sequence[int], now: float) -> None:
        path = tuple(path)
        if len(path) < 2 or path[0] != self.id or len(set(path)) != len(path):
            return
        dst = path[-1]
        routes = [r for r in self.cache.get(dst, []) if r.expiry > now and r.path != path]
        routes.append(CachedRoute(path, now + self.p.route_timeout))
        routes.sort(key=lambda r: (r.hops, r.path))
        self.cache[dst] = routes[: self.p.cache_paths]

    def learn_path(self, path: Sequence[int], sender: int, now: float) -> None:
        """Cache sub-routes to every node of ``path`` heard from ``sender``."""
        path = tuple(path)
        if self.id in path:
            k = path.index(self.id)
            fwd, back = path[k:], path[: k + 1][::-1]
        elif sender in path:
            k = path.index(sender)
            fwd, back = (self.id,) + path[k:], (self.id,) + path[: k + 1][::-1]
        else:
            return
        for seg in (fwd, back):
            for j in range(1, len(seg)):
                self._cache_path(seg[: j + 1], now)

    def _learn_table_path(self, path: Sequence[int], sender: int, now: float, seqs: Dict[int, int] | None = None):
        """Path accumulation: routes to every node of ``path`` via ``sender``."""
        path = tuple(path)
        if sender not in path:
            return
        k = path.index(sender)
        for j, node in enumerate(path):
            if node == self.id or self.id in path[min(j, k): max(j, k) + 1]:
                continue
            self._install(node, sender, abs(k - j) + 1, now, (seqs or {}).get(node, 0))

    def route(self, dst: int, now: float):
        """Next hop (routing table) or full path (route cache), else None."""
        if self.f.store == ROUTE_CACHE:
            routes = [r for r in self.cache.get(dst, []) if r.expiry > now]
            self.cache[dst] = routes
            return routes[0].path if routes else None
        entry = self.table.get(dst)
        if entry is None or not entry.usable(now):
            return None
        return entry.next_hop

    def has_route(self, dst: int, now: float) -> bool:
        return self.route(dst, now) is not None

    def _drop_link(self, a: int, b: int) -> List[int]:
        """Forget every cached path that crosses link a-b; return affected dsts."""
        affected = []
        for dst, routes in list(self.cache.items()):
            keep = []
            for r in routes:
                pairs = set(zip(r.path, r.path[1:]))
                if (a, b) in pairs or (b, a) in pairs:
                    continue
                keep.append(r)
            if len(keep) != len(routes):
                affected.append(dst)
            self.cache[dst] = keep
        return affected

    # -- data plane --------------------------------------------------------

    def send_data(self, packet: Packet, now: float) -> List[Action]:
        """A locally generated DATA packet; buffers it and originates if needed."""
        queue = self.buffer.setdefault(packet.dst, [])
        if len(queue) >= self.p.send_buffer:
            return [Drop(packet, "buffer-full")]
        queue.append(packet)
        return self.originate(packet.dst, now)

    def originate(self, dst: int, now: float) -> List[Action]:
        """Route queued data for ``dst``.

        With the store check, a valid stored route suppresses discovery.
        Without it every origination starts a search (one per destination
        at a time); queued data still leaves on any valid entry meanwhile.
        """
        if not self.buffer.get(dst):
            return []
        out: List[Action] = []
        if not self.f.check_store_before_discovery and dst not in self.discovery:
            out += self._start_discovery(dst, 0, now)
        if self.route(dst, now) is not None:
            return out + self._flush(dst, now)
        if dst not in self.discovery:
            out += self._start_discovery(dst, 0, now)
        return out

    def _flush(self, dst: int, now: float) -> List[Action]:
        out: List[Action] = []
        queue = self.buffer.pop(dst, [])
        for pkt in queue:
            out += self._forward_data(pkt, now)
        return out

    def _forward_data(self, pkt: Packet, now: float, prev: Optional[int] = None) -> List[Action]:
        if pkt.hops > 2 * self.p.net_diameter:
            return [Drop(pkt, "ttl")]
        if self.f.carries_source_route:
            if pkt.origin == self.id and prev is None:
                path = self.route(pkt.dst, now)
                if path is None:
                    return [Drop(pkt, "no-route")]
                pkt = pkt.forwarded(record=path)
            path = pkt.record
            k = path.index(self.id)
            nxt = path[k + 1]
        else:
            nxt = self.route(pkt.dst, now)
            if nxt is None:
                if pkt.dst in self.repairs:
                    self.repairs[pkt.dst].buffer.append(pkt)
                    return []
                out: List[Action] = [Drop(pkt, "no-route")]
                if prev is not None:
                    out.append(Send(self._rerr(pkt.dst, pkt.origin), to=prev))
                return out
            if self.f.refresh_on_use:
                self.table[pkt.dst].expiry = now + self.p.route_timeout
        if prev is not None:
            self.precursors.setdefault(pkt.dst, {})[pkt.origin] = prev
        self._activate(nxt, now)
        out = self._monitored_send(pkt.forwarded(hops=pkt.hops + 1, ack_request=False), nxt, now)
        return out

    def _activate(self, neighbor: int, now: float) -> None:
        self.active_links[neighbor] = now + self.p.route_timeout
        self.last_heard.setdefault(neighbor, now)

    def _monitored_send(self, pkt: Packet, nxt: int, now: float, attempt: int = 0) -> List[Action]:
        if not self.f.ack_link_monitor:
            return [Send(pkt, to=nxt)]
        passive = self.f.promiscuous and nxt != pkt.dst
        if not passive:
            # explicit ACKs are rate limited per link, like HELLOs
            if attempt == 0 and now - self.confirmed.get(nxt, -INF) < self.p.ack_holdoff:
                return [Send(pkt, to=nxt)]
            pkt = pkt.forwarded(ack_request=True)
        self.pending_acks[(pkt.uid, nxt)] = (pkt, attempt)
        return [
            Send(pkt, to=nxt, retain=True),
            Timer(self.p.ack_timeout, "ack", (pkt.uid, nxt), attempt),
        ]

    def _confirm(self, uid: int, neighbor: int, now: float) -> None:
        self.confirmed[neighbor] = now
        self.last_heard[neighbor] = now
        self.pending_acks.pop((uid, neighbor), None)

    def on_ack_timeout(self, key, attempt: int, now: float) -> List[Action]:
        pending = self.pending_acks.get(key)
        if pending is None or pending[1] != attempt:
            return []
        pkt, _ = pending
        uid, nxt = key
        if attempt == 0:
            return self._monitored_send(pkt, nxt, now, attempt=1)
        del self.pending_acks[key]
        return self.on_link_break(nxt, now, failed=pkt)

    # -- discovery ---------------------------------------------------------

    def _start_discovery(self, dst: int, attempt: int, now: float) -> List[Action]:
        self.rreq_counter += 1
        self.seq += 1
        rid = self.rreq_counter
        self.discovery[dst] = Discovery(attempt, rid)
        self.seen.add((self.id, rid))
        ttls = self.p.ttl_schedule()
        ttl = ttls[min(attempt, len(ttls) - 1)] if self.f.ers_enabled else self.p.net_diameter
        known = self.table.get(dst)
        rreq = Packet(
            Kind.RREQ, self.id, dst, uid=rid, ttl=ttl, hops=0, seq=self.seq,
            record=(self.id,) if self.f.source_routing else None,
            dst_seq=known.seq if known else 0,
        )
        wait = self.p.backoff_base * 2**attempt
        return [Send(rreq), Timer(wait, "discovery", dst, rid)]

    def on_discovery_timeout(self, dst: int, rid: int, now: float) -> List[Action]:
        d = self.discovery.get(dst)
        if d is None or d.rreq_id != rid:
            return []
        if self.f.check_store_before_discovery and self.route(dst, now) is not None:
            del self.discovery[dst]
            return self._flush(dst, now)
        if d.attempt + 1 > self.p.max_retries:
            del self.discovery[dst]
            out: List[Action] = [Note("discovery-failure")]
            out += [Drop(pkt, "discovery-failure") for pkt in self.buffer.pop(dst, [])]
            return out
        return self._start_discovery(dst, d.attempt + 1, now)

    def _rrep(self, target: int, requester: int, hops: int, seq: int, record, gratuitous=False) -> Packet:
        return Packet(
            Kind.RREP, target, requester, hops=hops, seq=seq,
            record=tuple(record) if record is not None else None, gratuitous=gratuitous,
        )

    def _rerr(self, unreachable: int, source: int, link=None, record=None) -> Packet:
        return Packet(Kind.RERR, self.id, source, unreachable=unreachable, link=link, record=record)

    def on_rreq(self, pkt: Packet, sender: int, now: float) -> List[Action]:
        if pkt.origin == self.id:
            return []
        key = (pkt.origin, pkt.uid)
        if pkt.dst == self.id and self.f.multiple_routes:
            # destination answers several copies so the source learns
            # alternative routes
            if key in self.seen and self.replies.get(key, 0) >= self.p.dsr_multiple_replies:
                return []
        elif key in self.seen:
            return []
        self.seen.add(key)
        record = pkt.record + (self.id,) if pkt.record is not None else None
        if record is not None and len(set(record)) != len(record):
            return []
        self._learn_reverse(pkt, sender, record, now)

        if pkt.dst == self.id:
            self.replies[key] = self.replies.get(key, 0) + 1
            self.seq = max(self.seq, pkt.dst_seq) + 1
            rrep = self._rrep(self.id, pkt.origin, 0, self.seq, record)
            return [Send(rrep, to=sender)]

        if self.f.gratuitous_rrep:
            grat = self._gratuitous(pkt, sender, record, now)
            if grat is not None:
                return grat

        if pkt.ttl > 0:
            return [Send(pkt.forwarded(ttl=pkt.ttl - 1, hops=pkt.hops + 1, record=record))]
        return []

    def _learn_reverse(self, pkt: Packet, sender: int, record, now: float) -> None:
        if self.f.store == ROUTE_CACHE:
            self.learn_path(record, sender, now)
        elif record is not None:
            self._learn_table_path(record, sender, now, {pkt.origin: pkt.seq})
        else:
            self._install(pkt.origin, sender, pkt.hops + 1, now, pkt.seq)

    def _gratuitous(self, pkt: Packet, sender: int, record, now: float) -> Optional[List[Action]]:
        if self.f.store == ROUTE_CACHE:
            path = self.route(pkt.dst, now)
            if path is None:
                return None
            full = record + path[1:]
            if len(set(full)) != len(full):
                return None
            rrep = self._rrep(pkt.dst, pkt.origin, len(path) - 1, 0, full, gratuitous=True)
            return [Send(rrep, to=sender)]
        entry = self.table.get(pkt.dst)
        if entry is None or not entry.usable(now) or entry.seq < pkt.dst_seq:
            return None
        if entry.next_hop == sender:
            return None
        rrep = self._rrep(pkt.dst, pkt.origin, entry.hops, entry.seq, None, gratuitous=True)
        return [Send(rrep, to=sender)]

    def on_rrep(self, pkt: Packet, sender: int, now: float) -> List[Action]:
        own = pkt.dst == self.id
        if self.f.store == ROUTE_CACHE:
            self.learn_path(pkt.record, sender, now)
        else:
            accept_first = own and pkt.origin not in self.discovery and pkt.origin not in self.repairs
            cur = self.table.get(pkt.origin)
            if not (accept_first and cur is not None and cur.usable(now)):
                self._install(pkt.origin, sender, pkt.hops + 1, now, pkt.seq)
                if pkt.record is not None:
                    self._learn_table_path(pkt.record, sender, now)
        if own:
            target = pkt.origin
            out: List[Action] = []
            if target in self.repairs:
                out += self._finish_repair(target, now)
            if target in self.discovery and self.route(target, now) is not None:
                del self.discovery[target]
                out += self._flush(target, now)
            return out
        if self.f.store == ROUTE_CACHE:
            path = pkt.record
            if self.id not in path:
                return []
            k = path.index(self.id)
            if k == 0:
                return []
            nxt = path[k - 1]
        else:
            nxt = self.route(pkt.dst, now)
            if nxt is None:
                return []
        return [Send(pkt.forwarded(hops=pkt.hops + 1), to=nxt)]

    # -- maintenance -------------------------------------------------------

    def on_data(self, pkt: Packet, sender: int, now: float) -> List[Action]:
        self.last_heard[sender] = now
        self._activate(sender, now)
        if self.f.store == ROUTE_CACHE and pkt.record:
            self.learn_path(pkt.record, sender, now)
        if pkt.dst == self.id:
            out: List[Action] = [Deliver(pkt)]
            if pkt.ack_request:
                out.append(Send(Packet(Kind.ACK, self.id, sender, uid=pkt.uid), to=sender))
            return out
        out = []
        if pkt.ack_request:
            out.append(Send(Packet(Kind.ACK, self.id, sender, uid=pkt.uid), to=sender))
        return out + self._forward_data(pkt, now, prev=sender)

    def on_ack(self, pkt: Packet, sender: int, now: float) -> List[Action]:
        self._confirm(pkt.uid, sender, now)
        return []

    def on_link_break(self, neighbor: int, now: float, failed: Optional[Packet] = None) -> List[Action]:
        out: List[Action] = []
        self.active_links.pop(neighbor, None)
        if self.f.store == ROUTE_CACHE:
            self._drop_link(self.id, neighbor)
            if failed is not None:
                out += self._reroute_source_routed(failed, neighbor, now)
            return out

        affected = sorted(d for d, e in self.table.items() if e.valid and e.next_hop == neighbor)
        for dst in affected:
            entry = self.table[dst]
            entry.valid = False
            sources = {s: prev for s, prev in self.precursors.get(dst, {}).items() if s != self.id}
            if self.f.local_repair and sources and entry.hops <= self.p.repair_max_hops and dst not in self.repairs:
                out += self._start_repair(dst, entry.hops, now)
                continue
            out += self._notify_sources(dst, neighbor, now)
        return out

    def _notify_sources(self, dst: int, neighbor: int, now: float) -> List[Action]:
        out: List[Action] = []
        for src, prev in sorted(self.precursors.pop(dst, {}).items()):
            if src != self.id:
                out.append(Send(self._rerr(dst, src, link=(self.id, neighbor)), to=prev))
        return out

    def _reroute_source_routed(self, pkt: Packet, neighbor: int, now: float) -> List[Action]:
        out: List[Action] = []
        if pkt.origin == self.id:
            # the source tries another cached route, else rediscovers
            return self.send_data(pkt.forwarded(record=None, hops=0, ack_request=False), now)
        path = pkt.record
        k = path.index(self.id)
        back = path[: k + 1][::-1]
        rerr = self._rerr(pkt.dst, pkt.origin, link=(self.id, neighbor), record=back)
        out.append(Send(rerr, to=back[1]))
        out.append(Drop(pkt, "link-break"))
        return out

    def _start_repair(self, dst: int, hops: int, now: float) -> List[Action]:
        self.rreq_counter += 1
        self.seq += 1
        rid = self.rreq_counter
        self.repairs[dst] = Repair(rid)
        self.seen.add((self.id, rid))
        known = self.table.get(dst)
        rreq = Packet(
            Kind.RREQ, self.id, dst, uid=rid, ttl=max(1, hops), seq=self.seq,
            record=(self.id,) if self.f.source_routing else None,
            dst_seq=(known.seq + 1) if known else 0,
        )
        return [Note("local-repair"), Send(rreq), Timer(self.p.backoff_base, "repair", dst, rid)]

    def _finish_repair(self, dst: int, now: float) -> List[Action]:
        if self.route(dst, now) is None:
            return []
        rep = self.repairs.pop(dst)
        out: List[Action] = [Note("local-repair-success")]
        for pkt in rep.buffer:
            out += self._forward_data(pkt, now, prev=self.precursors.get(dst, {}).get(pkt.origin))
        return out

    def on_repair_timeout(self, dst: int, rid: int, now: float) -> List[Action]:
        rep = self.repairs.get(dst)
        if rep is None or rep.token != rid:
            return []
        if self.route(dst, now) is not None:
            return self._finish_repair(dst, now)
        del self.repairs[dst]
        out: List[Action] = [Note("local-repair-failure")]
        out += [Drop(pkt, "repair-failure") for pkt in rep.buffer]
        entry = self.table.get(dst)
        return out + self._notify_sources(dst, entry.next_hop if entry else -1, now)

    def on_rerr(self, pkt: Packet, sender: int, now: float) -> List[Action]:
        dst = pkt.unreachable
        if self.f.store == ROUTE_CACHE:
            if pkt.link is not None:
                self._drop_link(*pkt.link)
        else:
            entry = self.table.get(dst)
            if entry is not None and entry.next_hop == sender:
                entry.valid = False
        if pkt.dst == self.id:
            return self.originate(dst, now)
        if pkt.record is not None:
            if self.id not in pkt.record:
                return []
            k = pkt.record.index(self.id)
            if k + 1 >= len(pkt.record):
                return []
            return [Send(pkt, to=pkt.record[k + 1])]
        prev = self.precursors.get(dst, {}).pop(pkt.dst, None)
        if prev is None:
            return []
        return [Send(pkt, to=prev)]

    def hello_tick(self, now: float) -> List[Action]:
        """Per-link HELLOs while the node carries active routes; also the
        point where silent neighbors are declared lost."""
        if not self.f.periodic_hello:
            return []
        out: List[Action] = []
        window = (self.p.hello_loss + 0.5) * self.p.hello_interval
        for nb in sorted(self.active_links):
            if self.active_links[nb] <= now:
                del self.active_links[nb]
                continue
            if now - self.last_heard.get(nb, now) > window:
                out += self.on_link_break(nb, now)
        for nb in sorted(self.active_links):
            out.append(Send(Packet(Kind.HELLO, self.id, nb), to=nb))
        out.append(Timer(self.p.hello_interval, "hello"))
        return out

    def on_hello(self, pkt: Packet, sender: int, now: float) -> List[Action]:
        self.last_heard[sender] = now
        return []

    def on_overhear(self, pkt: Packet, sender: int, now: float) -> List[Action]:
        if not self.f.promiscuous:
            return []
        if pkt.kind is Kind.DATA and (pkt.uid, sender) in self.pending_acks:
            self._confirm(pkt.uid, sender, now)
        if pkt.kind is Kind.RERR and pkt.link is not None:
            self._drop_link(*pkt.link)
        elif pkt.record and pkt.kind in (Kind.DATA, Kind.RREP):
            self.learn_path(pkt.record, sender, now)
        return []

    def on_receive(self, pkt: Packet, sender: int, now: float) -> List[Action]:
        self.last_heard[sender] = now
        handler = {
            Kind.RREQ: self.on_rreq,
            Kind.RREP: self.on_rrep,
            Kind.RERR: self.on_rerr,
            Kind.HELLO: self.on_hello,
            Kind.ACK: self.on_ack,
            Kind.DATA: self.on_data,
        }[pkt.kind]
        return handler(pkt, sender, now)

    def on_timer(self, name: str, key, token, now: float) -> List[Action]:
        if name == "hello":
            return self.hello_tick(now)
        if name == "discovery":
            return self.on_discovery_timeout(key, token, now)
        if name == "repair":
            return self.on_repair_timeout(key, token, now)
        if name == "ack":
            return self.on_ack_timeout(key, token, now)
        raise ValueError(f"unknown timer {name!r}")

    def custody(self) -> List[int]:
        """uids of DATA packets this node currently holds."""
        uids = [p.uid for q in self.buffer.values() for p in q]
        uids += [p.uid for r in self.repairs.values() for p in r.buffer]
        uids += [p.uid for p, _ in self.pending_acks.values()]
        return uids
