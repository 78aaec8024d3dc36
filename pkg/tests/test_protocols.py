import pytest

from reactive_overhead.packets import Kind, Packet, data_packet
from reactive_overhead.protocols import (
    AODV,
    DSR,
    DYMO,
    Deliver,
    Drop,
    LoopError,
    Note,
    ProtocolFeatureSet,
    ProtocolParams,
    RoutingAgent,
    Send,
    Timer,
    preset,
)


def sends(actions, kind=None):
    return [a for a in actions if isinstance(a, Send) and (kind is None or a.packet.kind is kind)]


def notes(actions):
    return [a.name for a in actions if isinstance(a, Note)]


def rreq(origin, dst, uid=1, ttl=3, hops=0, record=None, dst_seq=0):
    return Packet(Kind.RREQ, origin, dst, uid=uid, ttl=ttl, hops=hops, seq=1, record=record, dst_seq=dst_seq)


# -- features and params ---------------------------------------------------

def test_presets():
    assert preset("aodv") is AODV
    assert not DYMO.gratuitous_rrep and not DYMO.check_store_before_discovery
    assert DSR.carries_source_route and not DSR.periodic_hello
    with pytest.raises(ValueError):
        preset("OLSR")


def test_feature_overrides():
    assert AODV.with_overrides(ers_enabled=False).ers_enabled is False
    with pytest.raises(ValueError):
        AODV.with_overrides(warp=True)
    with pytest.raises(ValueError):
        ProtocolFeatureSet("X", store="route-cache")


def test_ttl_schedule_capped_at_diameter():
    assert ProtocolParams().ttl_schedule() == [1, 3, 7, 16]
    assert ProtocolParams(net_diameter=5).ttl_schedule() == [1, 3, 5]
    assert ProtocolParams(net_diameter=1).ttl_schedule() == [1]


@pytest.mark.parametrize("ttls", [(), (3, 1), (1, 1), (-1, 2), ("diameter", 3)])
def test_bad_ers_sequences(ttls):
    with pytest.raises(ValueError):
        ProtocolParams(ers_ttls=ttls)


def test_bad_timers():
    with pytest.raises(ValueError):
        ProtocolParams(hello_interval=0)
    with pytest.raises(ValueError):
        ProtocolParams(max_retries=-1)


# -- origination -----------------------------------------------------------

def test_aodv_valid_route_sends_data_without_control():
    a = RoutingAgent(0, AODV)
    a._install(3, 1, 3, now=0.0)
    out = a.send_data(data_packet(0, 3, 1, 0.0), now=1.0)
    assert [s.packet.kind for s in sends(out)] == [Kind.DATA]
    assert sends(out)[0].to == 1


def test_dymo_valid_route_still_searches():
    a = RoutingAgent(0, DYMO)
    a._install(3, 1, 3, now=0.0)
    out = a.send_data(data_packet(0, 3, 1, 0.0), now=1.0)
    kinds = [s.packet.kind for s in sends(out)]
    assert kinds == [Kind.RREQ, Kind.DATA]
    assert sends(out, Kind.RREQ)[0].to is None


def test_dymo_one_search_per_destination():
    a = RoutingAgent(0, DYMO)
    a.send_data(data_packet(0, 3, 1, 0.0), now=0.0)
    out = a.send_data(data_packet(0, 3, 2, 0.0), now=0.1)
    assert sends(out) == []


def test_no_route_starts_ring_search():
    a = RoutingAgent(0, AODV)
    out = a.send_data(data_packet(0, 3, 1, 0.0), now=0.0)
    (s,) = sends(out)
    assert s.packet.kind is Kind.RREQ and s.packet.ttl == 1
    (t,) = [x for x in out if isinstance(x, Timer)]
    assert (t.name, t.delay) == ("discovery", 0.5)


def test_ers_disabled_uses_diameter():
    a = RoutingAgent(0, AODV.with_overrides(ers_enabled=False), ProtocolParams(net_diameter=6))
    out = a.send_data(data_packet(0, 3, 1, 0.0), now=0.0)
    assert sends(out)[0].packet.ttl == 6


def test_retries_exhausted_fail_and_drop():
    a = RoutingAgent(0, AODV)
    out = a.send_data(data_packet(0, 9, 1, 0.0), now=0.0)
    ttls = [sends(out)[0].packet.ttl]
    waits = []
    now = 0.0
    for _ in range(10):
        (t,) = [x for x in out if isinstance(x, Timer)]
        waits.append(t.delay)
        now += t.delay
        out = a.on_discovery_timeout(t.key, t.token, now)
        if not sends(out):
            break
        ttls.append(sends(out)[0].packet.ttl)
    assert ttls == [1, 3, 7, 16]
    assert waits == [0.5, 1.0, 2.0, 4.0]
    assert notes(out) == ["discovery-failure"]
    assert [d.reason for d in out if isinstance(d, Drop)] == ["discovery-failure"]
    assert a.discovery == {} and a.buffer == {}


def test_stale_discovery_timer_ignored():
    a = RoutingAgent(0, AODV)
    a.send_data(data_packet(0, 9, 1, 0.0), now=0.0)
    assert a.on_discovery_timeout(9, 999, 1.0) == []


# -- RREQ handling ---------------------------------------------------------

def test_duplicate_rreq_ignored():
    a = RoutingAgent(1, AODV)
    first = a.on_receive(rreq(0, 5), sender=0, now=0.0)
    assert len(sends(first, Kind.RREQ)) == 1
    assert a.on_receive(rreq(0, 5), sender=0, now=0.001) == []


def test_rreq_rebroadcast_decrements_ttl_and_learns_reverse_route():
    a = RoutingAgent(1, AODV)
    (s,) = sends(a.on_receive(rreq(0, 5, ttl=3), sender=0, now=0.0))
    assert (s.packet.ttl, s.packet.hops, s.to) == (2, 1, None)
    assert a.route(0, 0.0) == 0


def test_rreq_with_exhausted_ttl_not_forwarded():
    a = RoutingAgent(1, AODV)
    assert sends(a.on_receive(rreq(0, 5, ttl=0), sender=0, now=0.0)) == []


def test_destination_replies_to_sender():
    a = RoutingAgent(2, AODV)
    (s,) = sends(a.on_receive(rreq(0, 2, hops=1), sender=1, now=0.0))
    assert s.packet.kind is Kind.RREP and s.to == 1
    assert s.packet.origin == 2 and s.packet.dst == 0


def test_aodv_intermediate_answers_without_rebroadcast():
    a = RoutingAgent(1, AODV)
    a._install(5, 4, 2, now=0.0)
    out = a.on_receive(rreq(0, 5), sender=0, now=0.1)
    assert [s.packet.kind for s in sends(out)] == [Kind.RREP]
    assert sends(out)[0].packet.gratuitous and sends(out)[0].to == 0


def test_dymo_intermediate_rebroadcasts():
    a = RoutingAgent(1, DYMO)
    a._install(5, 4, 2, now=0.0)
    out = a.on_receive(rreq(0, 5, record=(0,)), sender=0, now=0.1)
    (s,) = sends(out)
    assert s.packet.kind is Kind.RREQ and s.to is None
    assert s.packet.record == (0, 1)


def test_rrep_completes_discovery_and_flushes():
    a = RoutingAgent(0, AODV)
    a.send_data(data_packet(0, 2, 1, 0.0), now=0.0)
    rrep = Packet(Kind.RREP, 2, 0, hops=1, seq=1)
    out = a.on_receive(rrep, sender=1, now=0.01)
    (s,) = sends(out)
    assert s.packet.kind is Kind.DATA and s.to == 1
    assert a.discovery == {}


def test_rrep_forwarded_along_reverse_route():
    a = RoutingAgent(1, AODV)
    a.on_receive(rreq(0, 2), sender=0, now=0.0)
    (s,) = sends(a.on_receive(Packet(Kind.RREP, 2, 0, hops=0, seq=1), sender=2, now=0.01))
    assert s.to == 0 and s.packet.hops == 1
    assert a.route(2, 0.01) == 2


def test_loop_rejected():
    a = RoutingAgent(1, AODV)
    with pytest.raises(LoopError):
        a.on_receive(Packet(Kind.RREP, 5, 0, hops=1), sender=1, now=0.0)


# -- data plane ------------------------------------------------------------

def test_destination_delivers():
    a = RoutingAgent(3, AODV)
    out = a.on_receive(data_packet(0, 3, 7, 0.0).forwarded(hops=2), sender=2, now=0.0)
    assert [type(x) for x in out] == [Deliver]


def test_forward_without_route_sends_rerr_upstream():
    a = RoutingAgent(1, AODV)
    out = a.on_receive(data_packet(0, 3, 7, 0.0), sender=0, now=0.0)
    assert [d.reason for d in out if isinstance(d, Drop)] == ["no-route"]
    (s,) = sends(out, Kind.RERR)
    assert s.to == 0 and s.packet.unreachable == 3


# -- maintenance -----------------------------------------------------------

def test_idle_link_break_is_silent():
    a = RoutingAgent(0, AODV)
    assert a.on_link_break(4, now=1.0) == []


def test_aodv_local_repair_on_chain():
    # chain 0 - 1 - 2 - 3; node 1 loses its link to 2
    a = RoutingAgent(1, AODV)
    a._install(3, 2, 2, now=0.0)
    a.on_receive(data_packet(0, 3, 1, 0.0).forwarded(hops=1), sender=0, now=0.1)
    out = a.on_link_break(2, now=0.2)
    assert notes(out) == ["local-repair"]
    (s,) = sends(out)
    assert s.packet.kind is Kind.RREQ and s.packet.ttl == 2
    assert sends(out, Kind.RERR) == []

    held = a.on_receive(data_packet(0, 3, 2, 0.15).forwarded(hops=1), sender=0, now=0.25)
    assert held == []
    assert a.custody() == [2]

    out = a.on_receive(Packet(Kind.RREP, 3, 1, hops=1, seq=5), sender=2, now=0.3)
    assert notes(out) == ["local-repair-success"]
    (fwd,) = sends(out)
    assert fwd.packet.kind is Kind.DATA and fwd.packet.uid == 2 and fwd.to == 2
    assert sends(out, Kind.RERR) == []


def test_failed_repair_notifies_source():
    a = RoutingAgent(1, AODV)
    a._install(3, 2, 2, now=0.0)
    a.on_receive(data_packet(0, 3, 1, 0.0).forwarded(hops=1), sender=0, now=0.1)
    out = a.on_link_break(2, now=0.2)
    (t,) = [x for x in out if isinstance(x, Timer)]
    out = a.on_timer(t.name, t.key, t.token, 0.2 + t.delay)
    assert notes(out) == ["local-repair-failure"]
    (s,) = sends(out, Kind.RERR)
    assert s.to == 0


def test_dsr_intermediate_break_reports_to_source():
    a = RoutingAgent(1, DSR)
    pkt = data_packet(0, 3, 5, 0.0).forwarded(record=(0, 1, 2, 3), hops=1)
    out = a.on_receive(pkt, sender=0, now=0.0)
    (t,) = [x for x in out if isinstance(x, Timer)]
    out = a.on_ack_timeout(t.key, t.token, 0.05)
    (t,) = [x for x in out if isinstance(x, Timer)]
    out = a.on_ack_timeout(t.key, t.token, 0.1)
    (rerr,) = sends(out, Kind.RERR)
    assert rerr.to == 0 and rerr.packet.link == (1, 2)
    assert [d.reason for d in out if isinstance(d, Drop)] == ["link-break"]


def test_dsr_source_falls_back_to_cached_alternate():
    a = RoutingAgent(0, DSR)
    a.learn_path((0, 1, 3), 1, 0.0)
    a.learn_path((0, 2, 4, 3), 2, 0.0)
    assert a.route(3, 0.0) == (0, 1, 3)
    failed = data_packet(0, 3, 5, 0.0).forwarded(record=(0, 1, 3), hops=1)
    out = a.on_link_break(1, 0.1, failed=failed)
    (s,) = sends(out, Kind.DATA)
    assert s.packet.record == (0, 2, 4, 3) and s.to == 2
    assert sends(out, Kind.RREQ) == []


def test_hello_only_on_active_links():
    a = RoutingAgent(0, AODV)
    idle = a.hello_tick(0.0)
    assert sends(idle) == [] and [x.name for x in idle if isinstance(x, Timer)] == ["hello"]
    a._activate(1, 0.0)
    a.on_hello(Packet(Kind.HELLO, 1, 0), 1, 0.5)
    (h,) = sends(a.hello_tick(1.0))
    assert h.packet.kind is Kind.HELLO and h.to == 1


def test_silent_neighbor_declared_lost():
    a = RoutingAgent(0, AODV)
    a._install(3, 1, 2, now=0.0)
    a._activate(1, 0.0)
    a.hello_tick(2.0)
    assert a.route(3, 2.0) == 1
    a.hello_tick(3.0)
    assert a.route(3, 3.0) is None


def test_dsr_sends_no_hello():
    a = RoutingAgent(0, DSR)
    a._activate(1, 0.0)
    assert a.hello_tick(1.0) == []


def test_dsr_overhearing_harvests_routes():
    a = RoutingAgent(9, DSR)
    pkt = data_packet(5, 7, 1, 0.0).forwarded(record=(5, 6, 7))
    assert a.on_overhear(pkt, 6, 0.0) == []
    assert a.route(7, 0.0) == (9, 6, 7)
    assert a.route(5, 0.0) == (9, 6, 5)


def test_overheard_rrep_teaches_like_addressed_rrep():
    record = (0, 1, 2, 3)
    heard = RoutingAgent(9, DSR)
    heard.on_overhear(Packet(Kind.RREP, 3, 0, record=record), 1, 0.0)
    addressed = RoutingAgent(9, DSR)
    addressed.on_receive(Packet(Kind.RREP, 3, 0, record=record), 1, 0.0)
    assert heard.cache == addressed.cache


def test_aodv_ignores_overheard_traffic():
    a = RoutingAgent(9, AODV)
    pkt = data_packet(5, 7, 1, 0.0).forwarded(record=(5, 6, 7))
    assert a.on_overhear(pkt, 6, 0.0) == []
    assert a.table == {}
