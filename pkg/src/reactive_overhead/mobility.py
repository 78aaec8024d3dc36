"""Random-waypoint mobility with zero pause time."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Tuple


@dataclass(frozen=True)
class MobileNode:
    id: int
    x: float
    y: float
    wx: float
    wy: float
    speed: float
    radio_range: float = 250.0

    @property
    def position(self) -> Tuple[float, float]:
        return self.x, self.y

    def distance_to(self, other: "MobileNode") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def random_point(rng: random.Random, arena: Tuple[float, float]) -> Tuple[float, float]:
    return rng.uniform(0.0, arena[0]), rng.uniform(0.0, arena[1])


def move(node: MobileNode, dt: float, rng: random.Random, arena: Tuple[float, float]) -> MobileNode:
    """Advance ``node`` by ``dt`` seconds toward its waypoint, drawing fresh
    waypoints on arrival."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if node.speed <= 0 or dt == 0:
        return node
    x, y, wx, wy = node.x, node.y, node.wx, node.wy
    budget = node.speed * dt
    while budget > 0:
        dist = math.hypot(wx - x, wy - y)
        if dist > budget:
            x += (wx - x) * budget / dist
            y += (wy - y) * budget / dist
            break
        x, y = wx, wy
        budget -= dist
        wx, wy = random_point(rng, arena)
    # segment endpoints lie in the (convex) arena; clamp rounding only
    x = min(max(x, 0.0), arena[0])
    y = min(max(y, 0.0), arena[1])
    return replace(node, x=x, y=y, wx=wx, wy=wy)
