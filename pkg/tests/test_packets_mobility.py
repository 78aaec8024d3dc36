import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from reactive_overhead.mobility import MobileNode, move
from reactive_overhead.packets import CONTROL_SIZE, Kind, Packet, data_packet

ARENA = (1000.0, 1000.0)


def test_data_packet_size():
    assert data_packet(0, 1, uid=1, created=0.0).size == 512


def test_source_route_adds_address_bytes():
    p = Packet(Kind.RREQ, 0, 3, record=(0, 1, 2))
    assert p.size == CONTROL_SIZE[Kind.RREQ] + 12


def test_negative_ttl_rejected():
    with pytest.raises(ValueError):
        Packet(Kind.RREQ, 0, 1, ttl=-1)


def test_forwarded_copy_leaves_original():
    p = Packet(Kind.RREQ, 0, 1, ttl=3)
    q = p.forwarded(ttl=2, hops=1)
    assert (p.ttl, p.hops) == (3, 0)
    assert (q.ttl, q.hops) == (2, 1)


def test_zero_speed_stays_put():
    n = MobileNode(0, 10, 20, 500, 500, speed=0)
    assert move(n, 5.0, random.Random(1), ARENA).position == (10, 20)


def test_moves_exactly_speed_times_dt():
    n = MobileNode(0, 0, 0, 100, 0, speed=2)
    m = move(n, 1.0, random.Random(1), ARENA)
    assert m.position == (2.0, 0.0)
    assert m.distance_to(n) == 2.0


def test_arrival_draws_new_waypoint():
    n = MobileNode(0, 0, 0, 1, 0, speed=2)
    m = move(n, 1.0, random.Random(1), ARENA)
    assert (m.wx, m.wy) != (1, 0)


def test_negative_dt_rejected():
    with pytest.raises(ValueError):
        move(MobileNode(0, 0, 0, 1, 1, speed=1), -0.1, random.Random(1), ARENA)


def test_million_steps_stay_in_arena():
    rng = random.Random(7)
    arena = (50.0, 30.0)
    n = MobileNode(0, 1, 1, 40, 20, speed=20)
    for _ in range(10 ** 6):
        n = move(n, 1.0, rng, arena)
        assert 0 <= n.x <= arena[0] and 0 <= n.y <= arena[1]


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0, 1000), st.floats(0, 1000), st.floats(0, 1000), st.floats(0, 1000),
    st.floats(0, 30), st.floats(0, 10), st.integers(0, 2 ** 32),
)
def test_step_never_exceeds_speed_budget(x, y, wx, wy, speed, dt, seed):
    n = MobileNode(0, x, y, wx, wy, speed=speed)
    m = move(n, dt, random.Random(seed), ARENA)
    assert m.distance_to(n) <= speed * dt + 1e-9
    assert 0 <= m.x <= ARENA[0] and 0 <= m.y <= ARENA[1]


def test_same_seed_same_path():
    def walk(seed):
        rng = random.Random(seed)
        n = MobileNode(0, 0, 0, 300, 300, speed=15)
        out = []
        for _ in range(200):
            n = move(n, 1.0, rng, ARENA)
            out.append(n.position)
        return out

    assert walk(3) == walk(3)
    assert walk(3) != walk(4)
