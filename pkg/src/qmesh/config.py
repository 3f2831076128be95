"""Experiment config files: a flat, sectioned key=value format.

The format is a TOML-compatible subset kept deliberately small so
experiment provenance stays diffable: `[section]` headers, one
`key = value` per line, `#` comments. Unknown sections or keys are hard
errors that name the offender and its line.
"""

from __future__ import annotations

from typing import Any, Optional

from .engine import SimConfig
from .policies import POLICY_NAMES
from .topology import MeshConfig
from .traffic import DEFAULT_INTERVAL_PHASES, PatternKind, TrafficSchedule


class ConfigError(Exception):
    """Malformed experiment config; message names the key and line."""


_BOOL = {"true": True, "false": False}

# section -> key -> coercion
_SCHEMA: dict[str, dict[str, Any]] = {
    "mesh": {"width": int, "height": int},
    "router": {
        "vcs_per_port": int,
        "buffer_depth": int,
        "learning_queue_capacity": int,
        "va_atomic": bool,
        "flit_bits": int,
    },
    "policy": {
        "name": str,
        "alpha": float,
        "gamma": float,
        "mu": float,
        "exploration": float,
        "shared_updates": bool,
        "include_arriving_vc": bool,
        "credence_half_life": int,
        "credence_floor": float,
        "cost_override": float,
    },
    "traffic": {
        "pattern": str,
        "schedule": str,
        "rate": float,
        "packet_len": int,
    },
    "run": {
        "warmup_cycles": int,
        "measure_cycles": int,
        "drain_timeout": int,
        "seed": int,
        "window_cycles": int,
    },
}


def _coerce(raw: str, kind, section: str, key: str, line_no: int):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        raw = raw[1:-1]
        if kind is str:
            return raw
    try:
        if kind is bool:
            return _BOOL[raw.lower()]
        return kind(raw)
    except (ValueError, KeyError):
        raise ConfigError(
            f"line {line_no}: value {raw!r} for {section}.{key} is not a valid {kind.__name__}"
        ) from None


def parse_config_text(text: str) -> dict[str, dict[str, Any]]:
    """Parse and validate against the schema; returns {section: {key: value}}."""
    data: dict[str, dict[str, Any]] = {}
    section: Optional[str] = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {line_no}: malformed section header {line!r}")
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(
                    f"line {line_no}: unknown section [{section}], expected one of "
                    f"{', '.join(sorted(_SCHEMA))}"
                )
            data.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key = value, got {line!r}")
        if section is None:
            raise ConfigError(f"line {line_no}: key outside of any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        if "#" in value:
            value = value.split("#", 1)[0]
        schema = _SCHEMA[section]
        if key not in schema:
            raise ConfigError(
                f"line {line_no}: unknown key {key!r} in [{section}], expected one of "
                f"{', '.join(sorted(schema))}"
            )
        if key in data[section]:
            raise ConfigError(f"line {line_no}: duplicate key {key!r} in [{section}]")
        data[section][key] = _coerce(value, schema[key], section, key, line_no)
    return data


def _parse_schedule(spec: str, rate: float, packet_len: int) -> TrafficSchedule:
    phases = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        name, _, dur = item.partition(":")
        try:
            kind = PatternKind(name.strip())
        except ValueError:
            raise ConfigError(
                f"unknown pattern {name.strip()!r} in schedule, expected one of "
                f"{', '.join(p.value for p in PatternKind)}"
            ) from None
        if not dur:
            raise ConfigError(f"schedule phase {item!r} needs a duration, e.g. transpose:100000")
        try:
            duration = int(dur)
        except ValueError:
            raise ConfigError(f"schedule phase {item!r} has a non-integer duration") from None
        phases.append((kind, duration))
    if not phases:
        raise ConfigError("schedule must contain at least one phase")
    return TrafficSchedule(tuple(phases), rate, packet_len)


def build_sim_config(data: dict[str, dict[str, Any]], seed_override: Optional[int] = None) -> SimConfig:
    mesh_kw = data.get("mesh", {})
    router_kw = dict(data.get("router", {}))
    policy_kw = dict(data.get("policy", {}))
    traffic_kw = dict(data.get("traffic", {}))
    run_kw = dict(data.get("run", {}))

    mesh = MeshConfig(mesh_kw.get("width", 8), mesh_kw.get("height", 8))

    policy_name = policy_kw.pop("name", "qrasp")
    if policy_name not in POLICY_NAMES:
        raise ConfigError(
            f"policy.name {policy_name!r} is not one of {'|'.join(POLICY_NAMES)}"
        )

    rate = traffic_kw.pop("rate", 0.02)
    packet_len = traffic_kw.pop("packet_len", 4)
    pattern = traffic_kw.pop("pattern", None)
    schedule_spec = traffic_kw.pop("schedule", None)
    if pattern is not None and schedule_spec is not None:
        raise ConfigError("give either traffic.pattern or traffic.schedule, not both")
    if schedule_spec is not None:
        if schedule_spec == "default_interval":
            schedule = TrafficSchedule(DEFAULT_INTERVAL_PHASES, rate, packet_len)
        else:
            schedule = _parse_schedule(schedule_spec, rate, packet_len)
    else:
        if pattern is None:
            pattern = "uniform"
        try:
            kind = PatternKind(pattern)
        except ValueError:
            raise ConfigError(
                f"traffic.pattern {pattern!r} is not one of {', '.join(p.value for p in PatternKind)}"
            ) from None
        schedule = TrafficSchedule(((kind, 1),), rate, packet_len)

    if seed_override is not None:
        run_kw["seed"] = seed_override

    try:
        return SimConfig(
            mesh=mesh,
            policy=policy_name,
            packet_len=packet_len,
            schedule=schedule,
            **router_kw,
            **policy_kw,
            **run_kw,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str, seed_override: Optional[int] = None) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_sim_config(parse_config_text(text), seed_override)


def echo_lines(cfg: SimConfig) -> list[str]:
    """Flat, sorted provenance echo of the resolved configuration."""
    sched = cfg.schedule
    items = {
        "mesh.width": cfg.mesh.width,
        "mesh.height": cfg.mesh.height,
        "router.vcs_per_port": cfg.vcs_per_port,
        "router.buffer_depth": cfg.buffer_depth,
        "router.learning_queue_capacity": cfg.learning_queue_capacity,
        "router.va_atomic": cfg.va_atomic,
        "router.flit_bits": cfg.flit_bits,
        "policy.name": cfg.policy,
        "policy.alpha": cfg.resolved_alpha,
        "policy.gamma": cfg.resolved_gamma,
        "policy.mu": cfg.mu,
        "policy.exploration": cfg.exploration,
        "policy.shared_updates": cfg.shared_updates,
        "policy.include_arriving_vc": cfg.include_arriving_vc,
        "policy.credence_half_life": cfg.credence_half_life,
        "policy.credence_floor": cfg.credence_floor,
        "traffic.schedule": "none" if sched is None else ",".join(
            f"{k.value}:{d}" for k, d in sched.phases
        ),
        "traffic.rate": None if sched is None else sched.injection_rate,
        "traffic.packet_len": cfg.packet_len,
        "run.warmup_cycles": cfg.warmup_cycles,
        "run.measure_cycles": cfg.measure_cycles,
        "run.drain_timeout": cfg.drain_timeout,
        "run.seed": cfg.seed,
        "run.window_cycles": cfg.window_cycles,
    }
    out = []
    for key in sorted(items):
        value = items[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        out.append(f"{key}={value}")
    return out
