"""The three figure kinds over sweep / timeseries CSVs.

Output is deterministic for a fixed input: Agg backend, fixed style, a
pinned svg hash salt, and no embedded dates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .csvio import CsvFormatError, read_rows, require_columns, to_bool, to_float

FIGURE_KINDS = ("latency_curve", "timeseries", "counters")

POLICY_ORDER = ("xy", "dyad", "qr", "bilcq", "crq", "qrasp")

plt.rcParams.update(
    {
        "svg.hashsalt": "qmesh-plots",
        "figure.figsize": (6.0, 4.0),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
    }
)


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    kind: str
    out_path: str
    pattern: Optional[str] = None
    policies: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}, expected one of {FIGURE_KINDS}")


def _filter_rows(spec: FigureSpec, rows):
    if spec.pattern is not None:
        rows = [r for r in rows if r["pattern"] == spec.pattern]
    if spec.policies is not None:
        rows = [r for r in rows if r["policy"] in spec.policies]
    if not rows:
        raise CsvFormatError("filters matched no rows")
    return rows


def _policy_sort_key(policy: str):
    return (POLICY_ORDER.index(policy) if policy in POLICY_ORDER else len(POLICY_ORDER), policy)


def _save(fig, spec: FigureSpec) -> None:
    metadata = {"Date": None} if spec.out_path.endswith(".svg") else None
    fig.savefig(spec.out_path, metadata=metadata)
    plt.close(fig)


def plot_latency_curve(spec: FigureSpec) -> None:
    rows = _filter_rows(spec, read_rows(spec.csv_path))
    require_columns(rows, ("policy", "rate", "seed", "mean_latency", "saturated"))
    series: dict[str, dict[float, list]] = {}
    for r in rows:
        series.setdefault(r["policy"], {}).setdefault(to_float(r["rate"]), []).append(r)
    fig, ax = plt.subplots()
    for policy in sorted(series, key=_policy_sort_key):
        points = []
        for rate in sorted(series[policy]):
            cell = series[policy][rate]
            lat = [to_float(r["mean_latency"]) for r in cell]
            lat = [v for v in lat if not math.isnan(v)]
            if not lat:
                continue
            saturated = any(to_bool(r["saturated"]) for r in cell)
            points.append((rate, sum(lat) / len(lat), saturated))
        if not points:
            continue
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        (line,) = ax.plot(xs, ys, marker="o", markersize=4, label=policy)
        sat_pts = [(x, y) for x, y, s in points if s]
        if sat_pts:  # saturated points get open markers
            ax.plot(
                [p[0] for p in sat_pts], [p[1] for p in sat_pts],
                linestyle="none", marker="o", markersize=7,
                markerfacecolor="none", markeredgecolor=line.get_color(),
            )
    ax.set_xlabel("injection rate (flits/node/cycle)")
    ax.set_ylabel("mean packet latency (cycles)")
    title = "latency vs injection rate"
    if spec.pattern:
        title += f" ({spec.pattern})"
    ax.set_title(title)
    ax.legend()
    _save(fig, spec)


def phase_boundaries(rows) -> list[int]:
    """Window starts where the active pattern changes."""
    boundaries = []
    prev = None
    for r in rows:
        if prev is not None and r["pattern"] != prev:
            boundaries.append(int(r["window_start"]))
        prev = r["pattern"]
    return boundaries


def plot_timeseries(spec: FigureSpec) -> None:
    rows = read_rows(spec.csv_path)
    require_columns(rows, ("window_start", "pattern", "delivered", "mean_latency"))
    rows.sort(key=lambda r: int(r["window_start"]))
    xs, ys = [], []
    for r in rows:
        if int(r["delivered"]) == 0:
            continue
        xs.append(int(r["window_start"]))
        ys.append(to_float(r["mean_latency"]))
    fig, ax = plt.subplots()
    ax.plot(xs, ys, linewidth=0.9)
    for b in phase_boundaries(rows):
        ax.axvline(b, color="grey", linestyle="--", linewidth=0.8)
    ax.set_xlabel("cycle")
    ax.set_ylabel("windowed mean latency (cycles)")
    ax.set_title("latency over time with pattern switches")
    _save(fig, spec)


COUNTER_COLUMNS = ("learning_flits", "qtable_writes")


def plot_counters(spec: FigureSpec) -> None:
    rows = _filter_rows(spec, read_rows(spec.csv_path))
    require_columns(rows, ("policy",) + COUNTER_COLUMNS)
    by_policy: dict[str, list] = {}
    for r in rows:
        by_policy.setdefault(r["policy"], []).append(r)
    policies = sorted(by_policy, key=_policy_sort_key)
    fig, ax = plt.subplots()
    width = 0.8 / len(COUNTER_COLUMNS)
    for j, column in enumerate(COUNTER_COLUMNS):
        values = [
            sum(to_float(r[column]) for r in by_policy[p]) / len(by_policy[p]) for p in policies
        ]
        offset = (j - (len(COUNTER_COLUMNS) - 1) / 2) * width
        ax.bar([i + offset for i in range(len(policies))], values, width=width, label=column)
    ax.set_xticks(range(len(policies)))
    ax.set_xticklabels(policies)
    ax.set_ylabel("events per run (mean)")
    ax.set_title("table and sideband activity per policy")
    ax.legend()
    _save(fig, spec)


_RENDERERS = {
    "latency_curve": plot_latency_curve,
    "timeseries": plot_timeseries,
    "counters": plot_counters,
}


def plot(spec: FigureSpec) -> None:
    _RENDERERS[spec.kind](spec)
