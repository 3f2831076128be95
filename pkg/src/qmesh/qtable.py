"""Per-router Q-value tables with fixed-point quantization.

Q-values are stored as exactly-representable floats (multiples of the
format's resolution), one row per destination with one slot for the
horizontal minimal candidate and one for the vertical. The contention
policy additionally keeps a per-destination route column for the
shared-path update mechanism; the latency-cost policies need a wider
integer range and an optional per-slot update-age column.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor
from typing import Optional

from .topology import Direction, MeshConfig, RouteKey, encode_route


@dataclass(frozen=True)
class FixedFormat:
    """Unsigned fixed-point format: int_bits.frac_bits."""

    int_bits: int
    frac_bits: int

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def max_raw(self) -> int:
        return (1 << (self.int_bits + self.frac_bits)) - 1

    @property
    def max_value(self) -> float:
        return self.max_raw / self.scale

    @property
    def resolution(self) -> float:
        return 1.0 / self.scale

    @property
    def total_bits(self) -> int:
        return self.int_bits + self.frac_bits


#: Contention-valued Q-values: 6 integer + 4 fractional bits.
NARROW_FORMAT = FixedFormat(6, 4)
#: Latency-valued Q-values need more integer range: 12 + 4 bits.
WIDE_FORMAT = FixedFormat(12, 4)


def quantize(value: float, fmt: FixedFormat = NARROW_FORMAT) -> float:
    """Round to the nearest representable value (ties round up);
    negative inputs clamp to 0, large ones saturate at the format max."""
    if value <= 0.0:
        return 0.0
    raw = floor(value * fmt.scale + 0.5)
    if raw > fmt.max_raw:
        raw = fmt.max_raw
    return raw / fmt.scale


def q_update(
    old: float,
    alpha: float,
    cost: float,
    gamma: float,
    downstream_min: float,
    fmt: FixedFormat = NARROW_FORMAT,
) -> float:
    """One Bellman-style step toward cost + gamma * downstream estimate,
    quantized once at the end."""
    return quantize((1.0 - alpha) * old + alpha * (cost + gamma * downstream_min), fmt)


class QTable:
    """Q-value rows for every destination reachable from `owner`.

    Slot validity follows mesh geometry: a destination in the same row
    has no vertical slot and vice versa. Reads and writes are counted
    for the event-counter stats.
    """

    __slots__ = (
        "owner",
        "mesh",
        "fmt",
        "q_h",
        "q_v",
        "routes",
        "_route_buckets",
        "age_h",
        "age_v",
        "reads",
        "writes",
    )

    def __init__(
        self,
        owner: int,
        mesh: MeshConfig,
        fmt: FixedFormat = NARROW_FORMAT,
        track_routes: bool = False,
        track_ages: bool = False,
    ) -> None:
        n = mesh.nodes
        self.owner = owner
        self.mesh = mesh
        self.fmt = fmt
        self.q_h = [0.0] * n
        self.q_v = [0.0] * n
        self.routes: Optional[list[int]] = [-1] * n if track_routes else None
        self._route_buckets: Optional[dict[int, list[int]]] = {} if track_routes else None
        self.age_h = [0] * n if track_ages else None
        self.age_v = [0] * n if track_ages else None
        self.reads = 0
        self.writes = 0

    # -- slot addressing ------------------------------------------------

    def _lane(self, dest: int, direction: Direction) -> str:
        h, v = self.mesh.candidate_table[self.owner][dest]
        if direction == h:
            return "h"
        if direction == v:
            return "v"
        raise ValueError(
            f"direction {direction.name} is not a minimal candidate from {self.owner} to {dest}"
        )

    def is_candidate(self, dest: int, direction: Direction) -> bool:
        h, v = self.mesh.candidate_table[self.owner][dest]
        return direction == h or direction == v

    def get(self, dest: int, direction: Direction) -> float:
        self.reads += 1
        return (self.q_h if self._lane(dest, direction) == "h" else self.q_v)[dest]

    def set(self, dest: int, direction: Direction, value: float, cycle: int = 0) -> None:
        lane = self._lane(dest, direction)
        (self.q_h if lane == "h" else self.q_v)[dest] = value
        if self.age_h is not None:
            (self.age_h if lane == "h" else self.age_v)[dest] = cycle
        self.writes += 1

    def age_of(self, dest: int, direction: Direction) -> int:
        if self.age_h is None:
            return 0
        return (self.age_h if self._lane(dest, direction) == "h" else self.age_v)[dest]

    # -- queries ---------------------------------------------------------

    def min_estimate(self, dest: int, allowed) -> tuple[Direction, float]:
        """Smallest Q-value among `allowed` directions; the horizontal
        candidate wins ties."""
        if not allowed:
            raise ValueError(f"empty candidate set for destination {dest}")
        h, v = self.mesh.candidate_table[self.owner][dest]
        best_dir = None
        best = 0.0
        for d in allowed:
            if d == h:
                val = self.q_h[dest]
            elif d == v:
                val = self.q_v[dest]
            else:
                raise ValueError(
                    f"direction {Direction(d).name} is not a minimal candidate "
                    f"from {self.owner} to {dest}"
                )
            self.reads += 1
            if best_dir is None or val < best or (val == best and d == h):
                best_dir, best = Direction(d), val
        return best_dir, best

    def update(self, dest: int, direction: Direction, alpha: float, cost: float,
               gamma: float, estimate: float, cycle: int = 0) -> None:
        """Fused read-modify-write of one slot via the Bellman step."""
        lane_h = self._lane(dest, direction) == "h"
        lane = self.q_h if lane_h else self.q_v
        lane[dest] = q_update(lane[dest], alpha, cost, gamma, estimate, self.fmt)
        if self.age_h is not None:
            (self.age_h if lane_h else self.age_v)[dest] = cycle
        self.reads += 1
        self.writes += 1

    def best(self, dest: int) -> tuple[Direction, float]:
        """min over all valid slots (tie: horizontal)."""
        h, v = self.mesh.candidate_table[self.owner][dest]
        self.reads += 1
        if h < 0:
            return Direction(v), self.q_v[dest]
        if v < 0 or self.q_h[dest] <= self.q_v[dest]:
            return Direction(h), self.q_h[dest]
        return Direction(v), self.q_v[dest]

    # -- route column ----------------------------------------------------

    def record_route(self, dest: int, key: RouteKey) -> None:
        """Overwrite the last route seen for flows to `dest`."""
        if self.routes is None:
            return
        if dest == self.owner:
            raise ValueError("no route row for the table owner itself")
        code = encode_route(key)
        old = self.routes[dest]
        if old == code:
            return
        if old >= 0:
            self._route_buckets[old].remove(dest)
        self.routes[dest] = code
        bucket = self._route_buckets.setdefault(code, [])
        # buckets stay sorted ascending for deterministic truncation
        lo, hi = 0, len(bucket)
        while lo < hi:
            mid = (lo + hi) // 2
            if bucket[mid] < dest:
                lo = mid + 1
            else:
                hi = mid
        bucket.insert(lo, dest)

    def route_of(self, dest: int) -> Optional[RouteKey]:
        if self.routes is None or self.routes[dest] < 0:
            return None
        from .topology import decode_route

        return decode_route(self.routes[dest])

    def shared_dests(self, key: RouteKey, exclude: int, limit: int) -> list[int]:
        """Destinations (ascending, != exclude) whose recorded route
        equals `key`, truncated to `limit`."""
        if self._route_buckets is None or limit <= 0:
            return []
        bucket = self._route_buckets.get(encode_route(key), ())
        out = []
        for d in bucket:
            if d != exclude:
                out.append(d)
                if len(out) == limit:
                    break
        return out

    # -- debugging --------------------------------------------------------

    def dump_rows(self):
        """(dest, q_h, q_v, route) per destination, for debug CSVs."""
        rows = []
        for dest in range(self.mesh.nodes):
            if dest == self.owner:
                continue
            h, v = self.mesh.candidate_table[self.owner][dest]
            route = self.route_of(dest) if self.routes is not None else None
            rows.append(
                (
                    dest,
                    self.q_h[dest] if h >= 0 else None,
                    self.q_v[dest] if v >= 0 else None,
                    route,
                )
            )
        return rows
