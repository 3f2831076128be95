"""Mesh geometry, direction algebra, and the dual turn-model rules.

Coordinate convention: node ids are row-major, x grows east, y grows
south, so North is (x, y-1). All routing here is minimal: candidates
always point into the quadrant containing the destination.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Callable, NamedTuple, Optional, Union


class Direction(IntEnum):
    """Router ports / travel directions. Integer values double as the
    canonical route-encoding ordinals."""

    LOCAL = 0
    NORTH = 1
    EAST = 2
    SOUTH = 3
    WEST = 4

    def opposite(self) -> "Direction":
        return _OPPOSITE[self]

    @property
    def is_horizontal(self) -> bool:
        return self in (Direction.EAST, Direction.WEST)


_OPPOSITE = {
    Direction.LOCAL: Direction.LOCAL,
    Direction.NORTH: Direction.SOUTH,
    Direction.SOUTH: Direction.NORTH,
    Direction.EAST: Direction.WEST,
    Direction.WEST: Direction.EAST,
}

# (dx, dy) per direction; y grows south.
DELTA = {
    Direction.LOCAL: (0, 0),
    Direction.NORTH: (0, -1),
    Direction.EAST: (1, 0),
    Direction.SOUTH: (0, 1),
    Direction.WEST: (-1, 0),
}

MESH_DIRECTIONS = (Direction.NORTH, Direction.EAST, Direction.SOUTH, Direction.WEST)


class VcClass(IntEnum):
    """Virtual-channel class. Class A forbids turning after southward
    travel; class B forbids turning after northward travel."""

    A = 0
    B = 1


class Coord(NamedTuple):
    x: int
    y: int


class RouteKey(NamedTuple):
    """A route through one router: arrival port and selected output."""

    in_dir: Direction
    out_dir: Direction


@dataclass(frozen=True)
class MeshConfig:
    """2D-mesh dimensions in nodes."""

    width: int = 8
    height: int = 8

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError(f"mesh must be at least 2x2, got {self.width}x{self.height}")

    @property
    def nodes(self) -> int:
        return self.width * self.height

    def id_to_coord(self, node: int) -> Coord:
        if not 0 <= node < self.nodes:
            raise ValueError(f"node id {node} out of range for {self.width}x{self.height} mesh")
        return Coord(node % self.width, node // self.width)

    def coord_to_id(self, coord: Coord) -> int:
        x, y = coord
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"coordinate {coord} out of range for {self.width}x{self.height} mesh")
        return y * self.width + x

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def neighbor(self, node: int, direction: Direction) -> Optional[int]:
        """Adjacent node id in `direction`, or None at the mesh edge."""
        x, y = self.id_to_coord(node)
        dx, dy = DELTA[direction]
        if direction == Direction.LOCAL or not self.in_bounds(x + dx, y + dy):
            return None
        return (y + dy) * self.width + (x + dx)

    @cached_property
    def neighbor_table(self) -> list[list[int]]:
        """[node][direction] -> neighbor id or -1. LOCAL slot is -1."""
        table = []
        for node in range(self.nodes):
            row = [-1] * 5
            for d in MESH_DIRECTIONS:
                n = self.neighbor(node, d)
                row[d] = -1 if n is None else n
            table.append(row)
        return table

    @cached_property
    def coords(self) -> list[Coord]:
        return [self.id_to_coord(n) for n in range(self.nodes)]

    @cached_property
    def candidate_table(self) -> list[list[tuple[int, int]]]:
        """[src][dst] -> (horizontal candidate, vertical candidate) as
        Direction ints, -1 where the axis is already aligned."""
        table = []
        for s in range(self.nodes):
            sx, sy = self.coords[s]
            row = []
            for d in range(self.nodes):
                dx, dy = self.coords[d]
                h = -1 if dx == sx else int(Direction.EAST if dx > sx else Direction.WEST)
                v = -1 if dy == sy else int(Direction.SOUTH if dy > sy else Direction.NORTH)
                row.append((h, v))
            table.append(row)
        return table

    def manhattan(self, a: int, b: int) -> int:
        ax, ay = self.coords[a]
        bx, by = self.coords[b]
        return abs(ax - bx) + abs(ay - by)


def minimal_candidates(cur: Coord, dst: Coord) -> tuple[Direction, ...]:
    """Output directions that strictly reduce Manhattan distance to dst,
    horizontal candidate first. Returns (LOCAL,) at the destination."""
    if cur == dst:
        return (Direction.LOCAL,)
    dirs = []
    if dst.x > cur.x:
        dirs.append(Direction.EAST)
    elif dst.x < cur.x:
        dirs.append(Direction.WEST)
    if dst.y > cur.y:
        dirs.append(Direction.SOUTH)
    elif dst.y < cur.y:
        dirs.append(Direction.NORTH)
    return tuple(dirs)


def allowed_turn(vc_class: VcClass, prev_travel: Direction, next_travel: Direction) -> bool:
    """Turn legality over travel directions.

    Injection (prev LOCAL) and ejection (next LOCAL) are always allowed;
    180-degree turns never are. Class A additionally forbids
    south-then-east/west, class B north-then-east/west.
    """
    if prev_travel == Direction.LOCAL or next_travel == Direction.LOCAL:
        return True
    if next_travel == _OPPOSITE[prev_travel]:
        return False
    if vc_class == VcClass.A:
        return not (prev_travel == Direction.SOUTH and next_travel.is_horizontal)
    return not (prev_travel == Direction.NORTH and next_travel.is_horizontal)


def vc_class_for(src: Coord, dst: Coord, pkt_id: int) -> VcClass:
    """Class assignment: northbound flows need class A (north-first turns
    legal), southbound need B; same-row flows alternate on packet id."""
    if dst.y < src.y:
        return VcClass.A
    if dst.y > src.y:
        return VcClass.B
    return VcClass.A if pkt_id % 2 == 0 else VcClass.B


TurnRule = Union[VcClass, Callable[[Direction, Direction], bool]]


def cdg_acyclic(rule: TurnRule, mesh: MeshConfig) -> bool:
    """Whether the channel dependency graph induced by a turn rule is
    acyclic.

    Channels are directed mesh links (node, travel direction); an edge
    c1 -> c2 exists when a packet holding c1 may request c2, i.e. the
    links are head-to-tail and the turn between their travel directions
    is permitted. `rule` is a VcClass or a (prev, next) -> bool
    predicate (the latter lets tests model a no-restrictions router).
    Acyclicity is decided by Kahn peeling.
    """
    permitted: Callable[[Direction, Direction], bool]
    if isinstance(rule, VcClass):
        permitted = lambda p, n: allowed_turn(rule, p, n)
    else:
        permitted = rule

    nbr = mesh.neighbor_table
    channels = [(node, d) for node in range(mesh.nodes) for d in MESH_DIRECTIONS if nbr[node][d] >= 0]
    index = {c: i for i, c in enumerate(channels)}
    succs: list[list[int]] = [[] for _ in channels]
    indeg = [0] * len(channels)
    for node, d in channels:
        i = index[(node, d)]
        mid = nbr[node][d]
        for d2 in MESH_DIRECTIONS:
            if nbr[mid][d2] < 0 or d2 == d.opposite():
                continue
            if permitted(d, d2):
                j = index[(mid, d2)]
                succs[i].append(j)
                indeg[j] += 1

    stack = [i for i, deg in enumerate(indeg) if deg == 0]
    peeled = 0
    while stack:
        i = stack.pop()
        peeled += 1
        for j in succs[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                stack.append(j)
    return peeled == len(channels)


_ROUTE_ORDER = (Direction.LOCAL, Direction.NORTH, Direction.EAST, Direction.SOUTH, Direction.WEST)


def encode_route(key: RouteKey) -> int:
    """Injective code over the 20 valid (in, out) pairs with in != out:
    in_ordinal * 4 + index of out among the remaining directions."""
    if key.in_dir == key.out_dir:
        raise ValueError(f"route key must have distinct ports, got {key}")
    others = [d for d in _ROUTE_ORDER if d != key.in_dir]
    return int(key.in_dir) * 4 + others.index(key.out_dir)


def decode_route(code: int) -> RouteKey:
    if not 0 <= code < 20:
        raise ValueError(f"route code {code} out of range")
    in_dir = Direction(code // 4)
    others = [d for d in _ROUTE_ORDER if d != in_dir]
    return RouteKey(in_dir, others[code % 4])
