"""Command-line front end: run, sweep, verify-turns, dump-qtable.

CSV outputs start with '#'-prefixed provenance comment lines (resolved
config echo, seed, tool version) followed by an RFC-4180-style table.
Latency and throughput columns carry fixed 6-decimal formatting; no
timestamps anywhere, so identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import os
import sys
from . import __version__
from .config import ConfigError, echo_lines, load_config
from .engine import SimConfig, Simulator, StatsRecord, run, sweep
from .policies import POLICY_NAMES
from .topology import MeshConfig, VcClass, cdg_acyclic

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DRAIN_TIMEOUT = 3

RESULT_COLUMNS = (
    "policy", "pattern", "rate", "seed", "delivered", "injected",
    "mean_latency", "p99_latency", "throughput", "saturated",
    "qtable_reads", "qtable_writes", "learning_flits", "learning_drops",
    "flit_hops",
)


def _out_path(arg: str | None, default_name: str) -> str:
    if arg:
        return arg
    return os.path.join(os.environ.get("QMESH_OUT_DIR", "."), default_name)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _result_row(rec: StatsRecord) -> list[str]:
    values = {
        "policy": rec.policy,
        "pattern": rec.pattern,
        "rate": f"{rec.rate:g}",
        "seed": rec.seed,
        "delivered": rec.delivered,
        "injected": rec.injected,
        "mean_latency": rec.mean_latency,
        "p99_latency": rec.p99_latency,
        "throughput": rec.throughput,
        "saturated": rec.saturated,
        "qtable_reads": rec.qtable_reads,
        "qtable_writes": rec.qtable_writes,
        "learning_flits": rec.learning_flits,
        "learning_drops": rec.learning_drops,
        "flit_hops": rec.flit_hops,
    }
    return [_fmt(values[c]) if not isinstance(values[c], str) else values[c] for c in RESULT_COLUMNS]


def write_results_csv(path: str, cfg: SimConfig, records: list[StatsRecord]) -> None:
    lines = [f"# qmesh {__version__}"]
    lines += [f"# {line}" for line in echo_lines(cfg)]
    lines.append(",".join(RESULT_COLUMNS))
    for rec in records:
        lines.append(",".join(_result_row(rec)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_timeseries_csv(path: str, cfg: SimConfig, rec: StatsRecord) -> None:
    lines = [f"# qmesh {__version__}"]
    lines += [f"# {line}" for line in echo_lines(cfg)]
    lines.append("window_start,window_end,pattern,delivered,mean_latency")
    win = cfg.window_cycles
    for w in rec.windows:
        lines.append(
            f"{w.start},{w.start + win},{w.pattern},{w.delivered},{w.mean_latency:.6f}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _print_census(rec: StatsRecord) -> None:
    print(
        f"drain timeout: {rec.in_flight_end} packets still in flight "
        f"after {rec.drain_cycles} drain cycles",
        file=sys.stderr,
    )
    for pid, src, dst, entry, hops, where in rec.census:
        print(
            f"  packet {pid} {src}->{dst} entered cycle {entry}, {hops} hops done, "
            f"buffered at router {where}",
            file=sys.stderr,
        )


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.seed)
    rec = run(cfg)
    out = _out_path(args.out, "run.csv")
    write_results_csv(out, cfg, [rec])
    if args.timeseries:
        write_timeseries_csv(args.timeseries, cfg, rec)
    print(f"wrote {out}")
    if rec.saturated:
        _print_census(rec)
        return EXIT_DRAIN_TIMEOUT
    return EXIT_OK


def _parse_list(raw: str, kind):
    try:
        return [kind(item) for item in raw.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(f"malformed list {raw!r}") from None


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, None)
    rates = _parse_list(args.rates, float) if args.rates else [cfg.schedule.injection_rate]
    policies = _parse_list(args.policies, str) if args.policies else [cfg.policy]
    seeds = _parse_list(args.seeds, int) if args.seeds else [cfg.seed]
    for p in policies:
        if p not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {p!r} in --policies")
    records = sweep(cfg, rates, policies, seeds)
    out = _out_path(args.out, "sweep.csv")
    write_results_csv(out, cfg, records)
    saturated = sum(1 for r in records if r.saturated)
    print(f"wrote {out} ({len(records)} rows, {saturated} saturated)")
    return EXIT_OK


def cmd_verify_turns(args) -> int:
    ok = True
    for w in range(2, 9):
        for h in range(2, 9):
            mesh = MeshConfig(w, h)
            for cls in VcClass:
                if not cdg_acyclic(cls, mesh):
                    print(f"FAIL: class {cls.name} has a dependency cycle on {w}x{h}")
                    ok = False
    control = cdg_acyclic(lambda p, n: n != p.opposite(), MeshConfig(3, 3))
    print("turn classes A and B: channel dependency graphs acyclic on all meshes 2x2..8x8"
          if ok else "turn model check FAILED")
    print(f"control (all turns permitted) on 3x3: {'cyclic as expected' if not control else 'UNEXPECTEDLY ACYCLIC'}")
    return EXIT_OK if ok and not control else 1


def cmd_dump_qtable(args) -> int:
    cfg = load_config(args.config, args.seed)
    rec_cfg = cfg
    sim = Simulator(rec_cfg)
    from .engine import TrafficSource

    if cfg.schedule is not None and cfg.schedule.injection_rate > 0:
        sim.traffic = TrafficSource(cfg)
        sim.injection_until = cfg.warmup_cycles + cfg.measure_cycles
        sim.measure_window = (cfg.warmup_cycles, sim.injection_until)
        sim.run_cycles(sim.injection_until)
    if not sim.policy.needs_tables:
        print(f"policy {cfg.policy} keeps no q-tables", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_path(args.out, "qtable.csv")
    routers = [args.router] if args.router is not None else range(cfg.mesh.nodes)
    lines = [f"# qmesh {__version__}"] + [f"# {line}" for line in echo_lines(cfg)]
    lines.append("router,dest,q_h,q_v,route")
    for rid in routers:
        for dest, q_h, q_v, route in sim.policy.tables[rid].dump_rows():
            route_txt = "" if route is None else f"{route.in_dir.name}>{route.out_dir.name}"
            h_txt = "" if q_h is None else f"{q_h:.4f}"
            v_txt = "" if q_v is None else f"{q_v:.4f}"
            lines.append(f"{rid},{dest},{h_txt},{v_txt},{route_txt}")
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmesh",
        description="cycle-level 2D-mesh NoC simulator with Q-routing policies",
    )
    parser.add_argument("--version", action="version", version=f"qmesh {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single simulation run")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=int, default=None, help="override run.seed")
    p.add_argument("--out", default=None, help="result CSV path (default $QMESH_OUT_DIR/run.csv)")
    p.add_argument("--timeseries", default=None, help="also write per-window latency CSV here")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="cartesian (policy, rate, seed) sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--rates", default=None, help="comma-separated injection rates")
    p.add_argument("--policies", default=None, help=f"comma-separated from {'|'.join(POLICY_NAMES)}")
    p.add_argument("--seeds", default=None, help="comma-separated seeds")
    p.add_argument("--out", default=None, help="sweep CSV path (default $QMESH_OUT_DIR/sweep.csv)")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify-turns", help="prove both VC-class turn rules deadlock-free")
    p.set_defaults(fn=cmd_verify_turns)

    p = sub.add_parser("dump-qtable", help="run then dump routing tables as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--router", type=int, default=None, help="only this router id")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_dump_qtable)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
