"""Grid topology used by the analytical model.

Nodes sit on a rectangular lattice with 4-connectivity. Sections of the
lattice can be disabled (blackout) to model power failure or jamming. The
module also provides a brute-force blind-flooding oracle that counts RREQ
emissions under duplicate suppression.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

UNREACHABLE = None
EMPTY_TIER = None

_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class BlackoutRegion:
    """Inclusive rectangle of cells to disable."""

    row_lo: int
    row_hi: int
    col_lo: int
    col_hi: int

    def cells(self):
        for r in range(self.row_lo, self.row_hi + 1):
            for c in range(self.col_lo, self.col_hi + 1):
                yield r, c


@dataclass(frozen=True)
class GridNetwork:
    rows: int
    cols: int
    spacing: float
    dead: FrozenSet[Tuple[int, int]] = frozenset()

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be > 0, got {self.spacing}")

    @property
    def n(self) -> int:
        return self.rows * self.cols - len(self.dead)

    def node_id(self, row: int, col: int) -> int:
        return row * self.cols + col

    def cell(self, node: int) -> Tuple[int, int]:
        if not 0 <= node < self.rows * self.cols:
            raise ValueError(f"node id {node} outside grid")
        return divmod(node, self.cols)

    def is_alive(self, node: int) -> bool:
        return self.cell(node) not in self.dead

    def alive_nodes(self) -> List[int]:
        return [i for i in range(self.rows * self.cols) if divmod(i, self.cols) not in self.dead]

    def position(self, node: int) -> Tuple[float, float]:
        """Cartesian coordinates in meters (x along columns)."""
        r, c = self.cell(node)
        return c * self.spacing, r * self.spacing

    def neighbors(self, node: int) -> List[int]:
        r, c = self.cell(node)
        out = []
        for dr, dc in _OFFSETS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < self.rows and 0 <= cc < self.cols and (rr, cc) not in self.dead:
                out.append(rr * self.cols + cc)
        return sorted(out)

    def corner(self, which: str = "top-left") -> int:
        rows, cols = self.rows - 1, self.cols - 1
        r, c = {
            "top-left": (0, 0),
            "top-right": (0, cols),
            "bottom-left": (rows, 0),
            "bottom-right": (rows, cols),
        }[which]
        return self.node_id(r, c)

    def _require_alive(self, node: int, what: str = "node"):
        if not self.is_alive(node):
            raise ValueError(f"{what} {node} is not alive")

    def bfs_tiers(self, src: int) -> Dict[int, int]:
        """Hop distance from ``src`` to every reachable alive node."""
        self._require_alive(src, "source")
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def components(self) -> List[List[int]]:
        seen = set()
        comps = []
        for node in self.alive_nodes():
            if node in seen:
                continue
            comp = sorted(self.bfs_tiers(node))
            seen.update(comp)
            comps.append(comp)
        return comps

    def diameter(self) -> int:
        """Largest finite hop distance between two alive nodes."""
        return max(max(self.bfs_tiers(u).values()) for u in self.alive_nodes())


def build_grid(rows: int, cols: int, spacing: float = 1.0) -> GridNetwork:
    return GridNetwork(rows, cols, spacing)


def apply_blackout(g: GridNetwork, region: BlackoutRegion) -> GridNetwork:
    if not (0 <= region.row_lo <= region.row_hi < g.rows and 0 <= region.col_lo <= region.col_hi < g.cols):
        raise ValueError(f"blackout {region} outside {g.rows}x{g.cols} grid")
    dead = g.dead | frozenset(region.cells())
    if len(dead) == g.rows * g.cols:
        raise ValueError("blackout would remove every node")
    return GridNetwork(g.rows, g.cols, g.spacing, dead)


def hop_count(g: GridNetwork, src: int, dst: int) -> Optional[int]:
    """Shortest hop distance, or ``UNREACHABLE`` (None) when disconnected."""
    g._require_alive(dst, "destination")
    return g.bfs_tiers(src).get(dst, UNREACHABLE)


def expected_neighbors_at_tier(g: GridNetwork, src: int, j: int) -> Optional[float]:
    """Mean effective forward neighbor count of the nodes at hop tier ``j``.

    A node reached at tier ``j >= 1`` forwards to its alive neighbors minus
    the one it was reached from. Returns ``EMPTY_TIER`` (None) when no node
    sits at that tier.
    """
    if j < 1:
        raise ValueError("tier must be >= 1")
    dist = g.bfs_tiers(src)
    tier = [v for v, d in dist.items() if d == j]
    if not tier:
        return EMPTY_TIER
    return sum(len(g.neighbors(v)) - 1 for v in tier) / len(tier)


def tier_neighbor_profile(g: GridNetwork, src: int, count: int) -> List[float]:
    """``N_1 .. N_count``; tiers past the eccentricity contribute 0."""
    out = []
    for j in range(1, count + 1):
        nj = expected_neighbors_at_tier(g, src, j)
        out.append(0.0 if nj is None else nj)
    return out


@dataclass
class FloodTrace:
    transmissions: int
    reached: FrozenSet[int]
    per_tier: List[Tuple[int, int]] = field(default_factory=list)
    emitters: Tuple[int, ...] = ()


def flood_oracle(
    g: GridNetwork, src: int, ttl: Optional[int] = None, dst: Optional[int] = None
) -> FloodTrace:
    """Blind flooding with duplicate suppression.

    ``ttl`` counts the re-broadcast hops still allowed once the source has
    emitted: ttl=0 reaches only the source's neighbors. ``None`` means no
    limit. The destination absorbs the packet and never re-emits.
    """
    g._require_alive(src, "source")
    emitters = []
    tiers: Dict[int, int] = {}
    reached = {src}
    # hop tier at which each node first hears the packet
    frontier = [src]
    tier = 0
    while frontier:
        heard = set()
        for node in frontier:
            emitters.append(node)
            tiers[tier] = tiers.get(tier, 0) + 1
            for v in g.neighbors(node):
                if v not in reached:
                    heard.add(v)
        reached |= heard
        tier += 1
        if ttl is not None and tier > ttl:
            break
        frontier = sorted(v for v in heard if v != dst)
    return FloodTrace(
        transmissions=len(emitters),
        reached=frozenset(reached),
        per_tier=sorted(tiers.items()),
        emitters=tuple(emitters),
    )
