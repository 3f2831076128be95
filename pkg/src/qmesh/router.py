"""Cycle-accurate wormhole router state and pipeline stages.

Timing model (per head flit): buffer write at t, route computation at
t+1, VC allocation at t+2, switch allocation from t+3; a granted flit
occupies the switch/link the next cycle and is written downstream at
grant+2. Body and tail flits skip RC/VA and stream through switch
allocation one per output per cycle. Credits return on dedicated wires
one cycle after a buffer slot frees.

Stages are evaluated SA -> VA -> RC inside one cycle so nothing can
fall through two stages in the same cycle. Downstream VC allocation is
atomic: a VC is claimable only when unreserved and all its credits are
home, which keeps two packets from ever sharing a VC buffer.
"""

from __future__ import annotations

from collections import deque

from .topology import Direction, MeshConfig

# VC pipeline stages
IDLE = 0
ROUTE = 1
VA_WAIT = 2
ACTIVE = 3

LOCAL = int(Direction.LOCAL)
_MESH_DIRS = (1, 2, 3, 4)
_OPP = (0, 3, 4, 1, 2)  # opposite direction by int value
_DIRS = (Direction.LOCAL, Direction.NORTH, Direction.EAST, Direction.SOUTH, Direction.WEST)


class Packet:
    __slots__ = (
        "pid", "src", "dst", "length", "vc_class", "gen_cycle", "entry_cycle",
        "measured", "hops", "in_dir", "write_cycle", "carried_cost",
        "rev_cost", "rev_est", "shared", "delivered_cycle",
    )

    def __init__(self, pid: int, src: int, dst: int, length: int, vc_class: int, gen_cycle: int):
        self.pid = pid
        self.src = src
        self.dst = dst
        self.length = length
        self.vc_class = vc_class
        self.gen_cycle = gen_cycle
        self.entry_cycle = -1
        self.measured = False
        self.hops = 0
        self.in_dir = LOCAL
        self.write_cycle = -1
        self.carried_cost = 0.0
        self.rev_cost = 0.0
        self.rev_est = 0.0
        self.shared = ()
        self.delivered_cycle = -1


class Flit:
    __slots__ = ("pkt", "is_head", "is_tail", "arr")

    def __init__(self, pkt: Packet, is_head: bool, is_tail: bool):
        self.pkt = pkt
        self.is_head = is_head
        self.is_tail = is_tail
        self.arr = -1


class VcState:
    __slots__ = ("port", "index", "buf", "stage", "route_out", "out_vc", "head_write_cycle")

    def __init__(self, port: int, index: int):
        self.port = port
        self.index = index
        self.buf = deque()
        self.stage = IDLE
        self.route_out = -1
        self.out_vc = -1
        self.head_write_cycle = -1


class Router:
    __slots__ = (
        "id", "coord", "vcs", "depth", "ports", "credits", "reservations",
        "out_claims", "rr", "eject_claims", "eject_rr", "rc_pending",
        "va_pending", "learning_out", "learning_cap", "lq_pending",
        "neighbor_ids", "dir_of_neighbor", "work", "counters", "claim_count",
        "va_atomic",
    )

    def __init__(self, rid: int, mesh: MeshConfig, vcs_per_port: int, buffer_depth: int,
                 learning_cap: int, va_atomic: bool = False):
        self.id = rid
        self.va_atomic = va_atomic
        self.coord = mesh.coords[rid]
        self.vcs = vcs_per_port
        self.depth = buffer_depth
        self.ports = [
            [VcState(p, v) for v in range(vcs_per_port)] for p in range(5)
        ]
        nbr_row = mesh.neighbor_table[rid]
        self.neighbor_ids = nbr_row  # [dir] -> id or -1
        self.dir_of_neighbor = {
            nbr_row[d]: Direction(d) for d in _MESH_DIRS if nbr_row[d] >= 0
        }
        self.credits = [None] * 5
        self.reservations = [None] * 5
        self.out_claims = [None] * 5
        self.rr = [0] * 5
        for d in _MESH_DIRS:
            if nbr_row[d] >= 0:
                self.credits[d] = [buffer_depth] * vcs_per_port
                self.reservations[d] = [False] * vcs_per_port
                self.out_claims[d] = []
        self.eject_claims = ([], [])
        self.eject_rr = [0, 0]
        self.rc_pending: list[VcState] = []
        self.va_pending: list[VcState] = []
        self.learning_out = {d: deque() for d in _MESH_DIRS if nbr_row[d] >= 0}
        self.learning_cap = learning_cap
        self.lq_pending = 0
        self.counters = None  # set by the simulator
        self.work = 0  # pending pipeline + learning items; 0 means skippable
        self.claim_count = 0  # VCs holding an output (mesh or eject)

    # -- state queries used by policies -----------------------------------

    def reserved_count(self, direction) -> int:
        d = int(direction)
        if d == LOCAL:
            return len(self.eject_claims[0]) + len(self.eject_claims[1])
        res = self.reservations[d]
        return sum(res) if res is not None else 0

    def free_credits(self, direction) -> int:
        cred = self.credits[int(direction)]
        return sum(cred) if cred is not None else 0

    def port_occupancy(self, direction) -> int:
        return sum(len(vc.buf) for vc in self.ports[int(direction)])

    # -- learning sideband -------------------------------------------------

    def enqueue_learning(self, toward, lp) -> bool:
        q = self.learning_out[int(toward)]
        if len(q) >= self.learning_cap:
            if lp.primary:
                # primaries are never dropped while a shared packet can
                # give up its slot; evict the stalest shared one
                for i, queued in enumerate(q):
                    if not queued.primary:
                        del q[i]
                        self.counters.learning_drops += 1
                        q.append(lp)
                        return True
            self.counters.learning_drops += 1
            return False
        q.append(lp)
        self.work += 1
        self.lq_pending += 1
        return True

    def learning_tick(self, sim, cycle: int) -> None:
        if not self.lq_pending:
            return
        for d, q in self.learning_out.items():
            if q:
                lp = q.popleft()
                self.work -= 1
                self.lq_pending -= 1
                sim.schedule_lp(cycle + 1, self.neighbor_ids[d], lp)
                sim.counters.learning_flits += 1

    # -- pipeline stages (evaluated SA -> VA -> RC each cycle) ---------------

    def tick(self, sim, cycle: int) -> None:
        if self.claim_count:
            self.sa_stage(sim, cycle)
        if self.va_pending:
            self.va_stage(cycle)
        if self.rc_pending:
            self.rc_stage(sim, cycle)
        if self.lq_pending:
            self.learning_tick(sim, cycle)

    def sa_stage(self, sim, cycle: int) -> None:
        flit_events = sim._flit_events
        credit_events = sim._credit_events
        nbr = self.neighbor_ids
        for d in _MESH_DIRS:
            claims = self.out_claims[d]
            if not claims:
                continue
            n = len(claims)
            credits_d = self.credits[d]
            start = self.rr[d] % n
            for k in range(n):
                i = (start + k) % n
                vc = claims[i]
                buf = vc.buf
                if not buf:
                    continue
                flit = buf[0]
                if flit.arr >= cycle or credits_d[vc.out_vc] <= 0:
                    continue
                # grant
                buf.popleft()
                credits_d[vc.out_vc] -= 1
                pkt = flit.pkt
                if flit.is_head:
                    pkt.hops += 1
                    sim.policy.on_head_granted(self, pkt, _DIRS[vc.port], _DIRS[d], cycle)
                if vc.port != LOCAL:
                    ev = credit_events.get(cycle + 1)
                    if ev is None:
                        ev = credit_events[cycle + 1] = []
                    ev.append((nbr[vc.port], _OPP[vc.port], vc.index))
                ev = flit_events.get(cycle + 2)
                if ev is None:
                    ev = flit_events[cycle + 2] = []
                ev.append((nbr[d], _OPP[d], vc.out_vc, flit))
                sim.counters.flit_hops += 1
                if flit.is_tail:
                    self.reservations[d][vc.out_vc] = False
                    vc.route_out = -1
                    vc.out_vc = -1
                    del claims[i]
                    self.claim_count -= 1
                    self.rr[d] = i
                    if buf:  # next packet's head was queued behind the tail
                        vc.stage = ROUTE
                        vc.head_write_cycle = cycle
                        self.rc_pending.append(vc)
                    else:
                        vc.stage = IDLE
                        self.work -= 1
                else:
                    self.rr[d] = i + 1
                break
        for cls in (0, 1):
            claims = self.eject_claims[cls]
            if not claims:
                continue
            n = len(claims)
            start = self.eject_rr[cls] % n
            for k in range(n):
                i = (start + k) % n
                vc = claims[i]
                buf = vc.buf
                if not buf:
                    continue
                flit = buf[0]
                if flit.arr >= cycle:
                    continue
                buf.popleft()
                if flit.is_head:
                    sim.policy.on_head_granted(self, flit.pkt, _DIRS[vc.port], Direction.LOCAL, cycle)
                if vc.port != LOCAL:
                    ev = credit_events.get(cycle + 1)
                    if ev is None:
                        ev = credit_events[cycle + 1] = []
                    ev.append((nbr[vc.port], _OPP[vc.port], vc.index))
                sim.note_consumed(flit, cycle)
                if flit.is_tail:
                    vc.route_out = -1
                    del claims[i]
                    self.claim_count -= 1
                    self.eject_rr[cls] = i
                    if buf:
                        vc.stage = ROUTE
                        vc.head_write_cycle = cycle
                        self.rc_pending.append(vc)
                    else:
                        vc.stage = IDLE
                        self.work -= 1
                else:
                    self.eject_rr[cls] = i + 1
                break

    def va_stage(self, cycle: int) -> None:
        pending = self.va_pending
        if not pending:
            return
        remaining = []
        half = self.vcs // 2
        for vc in pending:
            d = vc.route_out
            if d == LOCAL:
                vc.stage = ACTIVE
                self.eject_claims[vc.buf[0].pkt.vc_class].append(vc)
                self.claim_count += 1
                continue
            res = self.reservations[d]
            cred = self.credits[d]
            # non-atomic reallocation: a VC is claimable as soon as its
            # previous reservation cleared and a buffer slot is free; the
            # new packet queues behind the old one's tail downstream
            need = self.depth if self.va_atomic else 1
            base = vc.buf[0].pkt.vc_class * half
            grabbed = -1
            for v in range(base, base + half):
                if not res[v] and cred[v] >= need:
                    grabbed = v
                    break
            if grabbed < 0:
                remaining.append(vc)  # FIFO order keeps oldest request first
                continue
            res[grabbed] = True
            vc.out_vc = grabbed
            vc.stage = ACTIVE
            self.out_claims[d].append(vc)
            self.claim_count += 1
        self.va_pending = remaining

    def rc_stage(self, sim, cycle: int) -> None:
        pending = self.rc_pending
        if not pending:
            return
        remaining = []
        policy = sim.policy
        va_pending = self.va_pending
        for vc in pending:
            if vc.head_write_cycle >= cycle:
                remaining.append(vc)
                continue
            pkt = vc.buf[0].pkt
            if pkt.dst == self.id:
                out = Direction.LOCAL
            else:
                out = policy.select_output(self, pkt, sim.candidates(self, pkt))
            vc.route_out = int(out)
            vc.stage = VA_WAIT
            policy.on_route_computed(self, pkt, _DIRS[vc.port], out, cycle)
            va_pending.append(vc)
        self.rc_pending = remaining
