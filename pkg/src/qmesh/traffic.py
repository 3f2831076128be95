"""Synthetic traffic: destination patterns, Bernoulli injection, and
interval-based pattern schedules.

Permutation patterns are standard: transpose mirrors coordinates,
bit_reversal reverses the full node-address bits, butterfly swaps the
MSB and LSB. A source mapping to itself suppresses injection for that
slot instead of redrawing, keeping offered load interpretable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .topology import MeshConfig


class PatternKind(str, Enum):
    UNIFORM = "uniform"
    TRANSPOSE = "transpose"
    BIT_REVERSAL = "bit_reversal"
    BUTTERFLY = "butterfly"


#: Documented default for the pattern-switching experiment: three phases
#: of 100,000 cycles each.
DEFAULT_INTERVAL_PHASES = (
    (PatternKind.TRANSPOSE, 100_000),
    (PatternKind.BIT_REVERSAL, 100_000),
    (PatternKind.BUTTERFLY, 100_000),
)


@dataclass(frozen=True)
class TrafficSchedule:
    """Ordered (pattern, duration) phases plus injection parameters.

    `injection_rate` is offered load in flits per node per cycle; the
    per-cycle packet-injection probability is rate / packet_len.
    """

    phases: tuple[tuple[PatternKind, int], ...]
    injection_rate: float
    packet_len: int = 4

    def __post_init__(self) -> None:
        if not self.phases:
            raise ValueError("schedule needs at least one phase")
        for kind, duration in self.phases:
            if duration <= 0:
                raise ValueError(f"phase duration must be positive, got {duration}")
        if not 0.0 <= self.injection_rate <= 1.0:
            raise ValueError(f"injection rate must be in [0, 1], got {self.injection_rate}")
        if self.packet_len < 1:
            raise ValueError(f"packet length must be >= 1, got {self.packet_len}")
        if self.injection_rate / self.packet_len > 1.0:
            raise ValueError("per-cycle injection probability exceeds 1")

    @property
    def total_cycles(self) -> int:
        return sum(d for _, d in self.phases)

    @classmethod
    def single(cls, pattern: PatternKind, rate: float, packet_len: int = 4) -> "TrafficSchedule":
        return cls(((pattern, 1), ), rate, packet_len)


def active_pattern(schedule: TrafficSchedule, cycle: int) -> PatternKind:
    """Pattern of the phase containing `cycle`; phases repeat round-robin
    past the end (half-open intervals)."""
    offset = cycle % schedule.total_cycles
    for kind, duration in schedule.phases:
        if offset < duration:
            return kind
        offset -= duration
    raise AssertionError("unreachable")


def address_bits(mesh: MeshConfig) -> int:
    n = mesh.nodes
    if n & (n - 1):
        raise ValueError(f"bit patterns need a power-of-two node count, got {n}")
    return n.bit_length() - 1


def dest_for(pattern: PatternKind, src: int, mesh: MeshConfig, rng=None) -> Optional[int]:
    """Destination for one injection slot, or None when the pattern maps
    src to itself. Only UNIFORM consumes randomness."""
    if pattern == PatternKind.UNIFORM:
        # uniform over all nodes != src
        d = int(rng.integers(0, mesh.nodes - 1))
        return d if d < src else d + 1
    if pattern == PatternKind.TRANSPOSE:
        if mesh.width != mesh.height:
            raise ValueError("transpose needs a square mesh")
        x, y = mesh.id_to_coord(src)
        d = x * mesh.width + y
    elif pattern == PatternKind.BIT_REVERSAL:
        bits = address_bits(mesh)
        d = 0
        for i in range(bits):
            if src >> i & 1:
                d |= 1 << (bits - 1 - i)
    elif pattern == PatternKind.BUTTERFLY:
        bits = address_bits(mesh)
        msb, lsb = src >> (bits - 1) & 1, src & 1
        d = src & ~(1 << (bits - 1)) & ~1
        d |= lsb << (bits - 1) | msb
    else:
        raise ValueError(f"unknown pattern {pattern}")
    return None if d == src else d


def should_inject(rate: float, packet_len: int, rng) -> bool:
    """Bernoulli draw with p = rate / packet_len, so offered load in
    flits/node/cycle equals `rate` in expectation."""
    p = rate / packet_len
    if p > 1.0:
        raise ValueError(f"injection probability {p} exceeds 1")
    if p <= 0.0:
        return False
    return bool(rng.random() < p)
