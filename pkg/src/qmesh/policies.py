"""Routing policies: two oblivious/local baselines (xy, dyad) and four
table-driven ones (qr, bilcq, crq, qrasp).

The table policies differ in three places: what the per-hop cost is,
when it becomes available, and which table rows an update touches.

  qr     local queue latency, measured when the head wins switch
         allocation at the sender; one update per hop.
  bilcq  downstream input-port queue length at head arrival; plus a
         reverse-direction update piggybacked on data head flits.
  crq    downstream queue latency (available only when the head exits
         the downstream router) with a recency-scaled learning rate.
  qrasp  contention snapshot (occupied input VCs + reserved output VCs
         + weighted region reservations) taken right after route
         computation; additional updates for destinations recorded as
         sharing the packet's route through the sender.

Hook call sites (driven by the router pipeline):
  select_output      route computation, current router
  on_head_granted    head wins switch allocation (sender side)
  on_head_written    head buffer-write at the downstream router
  on_route_computed  route computation finished at the downstream router
  apply_learning     a learning packet arrives back at the sender
"""

from __future__ import annotations

from typing import NamedTuple

from .qtable import NARROW_FORMAT, WIDE_FORMAT, QTable
from .topology import MESH_DIRECTIONS, Direction, MeshConfig, RouteKey

POLICY_NAMES = ("xy", "dyad", "qr", "bilcq", "crq", "qrasp")


class CostSample(NamedTuple):
    """Contention cost breakdown at the downstream router."""

    r_i: int
    r_o: int
    q_p: int
    q_r: int
    q_y: float


class LearningPacket(NamedTuple):
    """Single-flit sideband message: downstream cost and estimate for one
    destination, sent from `origin` back to `target`. Primary packets
    (the routed packet's own destination) survive queue overflow by
    displacing queued shared ones."""

    dest: int
    cost: float
    estimate: float
    origin: int
    target: int
    issue_cycle: int
    age_cycle: int = 0
    primary: bool = True


def cost_qrasp(router, in_dir: Direction, out_dir: Direction, mu: float,
               include_arriving: bool = True) -> CostSample:
    """Path + region contention at `router` for a packet that arrived on
    `in_dir` and will leave via `out_dir`.

    r_i counts occupied VCs at the arrival port (the arriving packet's
    own VC included unless toggled off), r_o the reserved VCs at the
    selected output, and the region term sums reservations over the
    other non-local outputs.
    """
    r_i = 0
    for vc in router.ports[in_dir]:
        if vc.buf or vc.stage:
            r_i += 1
    if not include_arriving and r_i > 0:
        r_i -= 1
    r_o = router.reserved_count(out_dir)
    q_r = 0
    for d in MESH_DIRECTIONS:
        if d != out_dir:
            q_r += router.reserved_count(d)
    q_p = r_i + r_o
    return CostSample(r_i, r_o, q_p, q_r, q_p + mu * q_r)


def crq_effective_alpha(age_cycle: int, now: int, base_alpha: float,
                        half_life: int = 512, floor: float = 1.0 / 16) -> float:
    """Learning rate scaled by estimate recency: halves every
    `half_life` cycles since the estimate's entry was last written,
    never below `floor`."""
    credence = max(floor, 2.0 ** (-(now - age_cycle) / half_life))
    return base_alpha * credence


def make_learning_packets(router, policy, pkt, cost: float, cycle: int,
                          capacity: int) -> list[LearningPacket]:
    """Learning packets answered by `router` for an arriving head: the
    primary update for the packet's destination first, then one per
    stamped shared destination, truncated to the queue capacity."""
    target = router.neighbor_ids[pkt.in_dir]
    est, age = policy.estimate_for(router, pkt.dst, cycle)
    packets = [LearningPacket(pkt.dst, cost, est, router.id, target, cycle, age, primary=True)]
    for d in pkt.shared:
        if len(packets) >= capacity:
            break
        est, age = policy.estimate_for(router, d, cycle)
        packets.append(LearningPacket(d, cost, est, router.id, target, cycle, age, primary=False))
    return packets


class RoutingPolicy:
    """Base contract; the oblivious policies use only select_output."""

    name = "base"
    needs_tables = False
    wants_pre_occupancy = False
    fmt = None

    def __init__(self, cfg, mesh: MeshConfig) -> None:
        self.cfg = cfg
        self.mesh = mesh
        self.tables: list[QTable] = []
        self.discards = 0

    def select_output(self, router, pkt, candidates) -> Direction:
        raise NotImplementedError

    def on_head_granted(self, router, pkt, in_dir, out_dir, cycle) -> None:
        pass

    def on_head_written(self, router, pkt, in_dir, cycle, pre_occupancy) -> None:
        pass

    def on_route_computed(self, router, pkt, in_dir, out_dir, cycle) -> None:
        pass

    def apply_learning(self, router, lp: LearningPacket, cycle: int) -> None:
        pass

    # counters only live on Q tables; convenience sums for stats
    @property
    def table_reads(self) -> int:
        return sum(t.reads for t in self.tables)

    @property
    def table_writes(self) -> int:
        return sum(t.writes for t in self.tables)


class XyPolicy(RoutingPolicy):
    name = "xy"

    def select_output(self, router, pkt, candidates) -> Direction:
        # candidates are ordered horizontal-first
        return candidates[0]


class DyadPolicy(RoutingPolicy):
    name = "dyad"

    def select_output(self, router, pkt, candidates) -> Direction:
        if len(candidates) == 1:
            return candidates[0]
        best = candidates[0]
        best_free = router.free_credits(best)
        for d in candidates[1:]:
            free = router.free_credits(d)
            if free > best_free:
                best, best_free = d, free
        return best


class QPolicyBase(RoutingPolicy):
    """Shared machinery for the table policies: greedy minimum-estimate
    selection and the Bellman update on learning-packet arrival."""

    needs_tables = True
    fmt = WIDE_FORMAT
    track_routes = False
    track_ages = False

    def __init__(self, cfg, mesh: MeshConfig) -> None:
        super().__init__(cfg, mesh)
        self.alpha = cfg.resolved_alpha
        self.gamma = cfg.resolved_gamma
        self.tables = [
            QTable(i, mesh, self.fmt, track_routes=self.track_routes, track_ages=self.track_ages)
            for i in range(mesh.nodes)
        ]
        self.explore_rngs = None  # installed by the engine when exploration > 0

    def select_output(self, router, pkt, candidates) -> Direction:
        if len(candidates) == 1:
            self.tables[router.id].reads += 1
            return candidates[0]
        if self.explore_rngs is not None:
            rng = self.explore_rngs[router.id]
            if rng.random() < self.cfg.exploration:
                return candidates[int(rng.integers(0, len(candidates)))]
        direction, _ = self.tables[router.id].min_estimate(pkt.dst, candidates)
        return direction

    def estimate_for(self, router, dest: int, cycle: int) -> tuple[float, int]:
        """Minimum remaining-cost estimate at `router` for `dest` plus the
        age of the entry it came from; 0 and fresh at the destination."""
        if dest == router.id:
            return 0.0, cycle
        table = self.tables[router.id]
        direction, value = table.best(dest)
        return value, table.age_of(dest, direction)

    def effective_alpha(self, lp: LearningPacket, cycle: int) -> float:
        return self.alpha

    def apply_learning(self, router, lp: LearningPacket, cycle: int) -> None:
        direction = router.dir_of_neighbor.get(lp.origin)
        table = self.tables[router.id]
        if direction is None or not table.is_candidate(lp.dest, direction):
            self.discards += 1
            return
        alpha = self.effective_alpha(lp, cycle)
        table.update(lp.dest, direction, alpha, lp.cost, self.gamma, lp.estimate, cycle)


class QrPolicy(QPolicyBase):
    """Cost = cycles the head spent in the sender's router (buffer write
    to switch-allocation grant), carried on the head flit and answered
    by the downstream router with its estimate."""

    name = "qr"

    def on_head_granted(self, router, pkt, in_dir, out_dir, cycle) -> None:
        if out_dir != Direction.LOCAL:
            pkt.carried_cost = cycle - pkt.write_cycle

    def on_head_written(self, router, pkt, in_dir, cycle, pre_occupancy) -> None:
        est, age = self.estimate_for(router, pkt.dst, cycle)
        target = router.neighbor_ids[in_dir]
        router.enqueue_learning(
            in_dir, LearningPacket(pkt.dst, pkt.carried_cost, est, router.id, target, cycle, age)
        )


class BilcqPolicy(QPolicyBase):
    """Cost = downstream input-port queue length at head arrival; data
    head flits additionally carry the sender's estimate toward the
    packet's source so the reverse path learns from forward traffic."""

    name = "bilcq"
    wants_pre_occupancy = True

    def on_head_granted(self, router, pkt, in_dir, out_dir, cycle) -> None:
        if out_dir == Direction.LOCAL:
            return
        # queue length at this router's input port facing the receiver:
        # that is where reverse-direction traffic from it would arrive
        pkt.rev_cost = sum(len(vc.buf) for vc in router.ports[out_dir])
        pkt.rev_est = self.estimate_for(router, pkt.src, cycle)[0]

    def on_head_written(self, router, pkt, in_dir, cycle, pre_occupancy) -> None:
        target = router.neighbor_ids[in_dir]
        est, age = self.estimate_for(router, pkt.dst, cycle)
        router.enqueue_learning(
            in_dir, LearningPacket(pkt.dst, pre_occupancy, est, router.id, target, cycle, age)
        )
        self.reverse_update(router, pkt, in_dir, cycle)

    def reverse_update(self, router, pkt, in_dir, cycle) -> None:
        if pkt.src == router.id:
            return
        table = self.tables[router.id]
        if not table.is_candidate(pkt.src, in_dir):
            self.discards += 1
            return
        table.update(pkt.src, in_dir, self.alpha, pkt.rev_cost, self.gamma, pkt.rev_est, cycle)


class CrqPolicy(QPolicyBase):
    """Cost = downstream queue latency, so the update waits until the
    head exits the downstream router; the learning rate is scaled by the
    recency of the estimate's table entry."""

    name = "crq"
    track_ages = True

    def effective_alpha(self, lp: LearningPacket, cycle: int) -> float:
        return crq_effective_alpha(
            lp.age_cycle, cycle, self.alpha, self.cfg.credence_half_life, self.cfg.credence_floor
        )

    def on_head_granted(self, router, pkt, in_dir, out_dir, cycle) -> None:
        if in_dir == Direction.LOCAL:
            return
        cost = cycle - pkt.write_cycle
        est, age = self.estimate_for(router, pkt.dst, cycle)
        target = router.neighbor_ids[in_dir]
        router.enqueue_learning(
            in_dir, LearningPacket(pkt.dst, cost, est, router.id, target, cycle, age)
        )


class QraspPolicy(QPolicyBase):
    """Region-aware contention cost with shared-path experience.

    The sender stamps the head flit with the destinations whose recorded
    route through it matches the packet's; the downstream router answers
    with one learning packet per destination as soon as its route
    computation fixes the output (the earliest cycle both contention
    terms exist)."""

    name = "qrasp"
    fmt = NARROW_FORMAT
    track_routes = True

    def on_head_granted(self, router, pkt, in_dir, out_dir, cycle) -> None:
        if out_dir == Direction.LOCAL or not self.cfg.shared_updates:
            return
        key = RouteKey(in_dir, out_dir)
        pkt.shared = tuple(
            self.tables[router.id].shared_dests(key, pkt.dst, self.cfg.learning_queue_capacity - 1)
        )

    def on_route_computed(self, router, pkt, in_dir, out_dir, cycle) -> None:
        if pkt.dst != router.id:
            self.tables[router.id].record_route(pkt.dst, RouteKey(in_dir, out_dir))
        if in_dir == Direction.LOCAL:
            return
        if self.cfg.cost_override is not None:
            cost = self.cfg.cost_override
        else:
            cost = cost_qrasp(router, in_dir, out_dir, self.cfg.mu, self.cfg.include_arriving_vc).q_y
        for lp in make_learning_packets(router, self, pkt, cost, cycle, self.cfg.learning_queue_capacity):
            router.enqueue_learning(in_dir, lp)


_POLICY_CLASSES = {
    "xy": XyPolicy,
    "dyad": DyadPolicy,
    "qr": QrPolicy,
    "bilcq": BilcqPolicy,
    "crq": CrqPolicy,
    "qrasp": QraspPolicy,
}


def make_policy(cfg, mesh: MeshConfig) -> RoutingPolicy:
    try:
        cls = _POLICY_CLASSES[cfg.policy]
    except KeyError:
        raise ValueError(f"unknown policy {cfg.policy!r}, expected one of {'|'.join(POLICY_NAMES)}")
    return cls(cfg, mesh)
