"""Simulation configuration: YAML schema, defaults, validation, named configs.

A config file is a YAML mapping; every key is optional and falls back to
:data:`DEFAULTS`.  ``layout`` is ``default``, a path (relative to the config
file), or an inline layout mapping (see :mod:`eatsss.scenario`).

Policies are keyed by traffic type.  Thresholds are given either as raw
per-WAT values or as one ``normalized_threshold`` q, which expands to
``sinr > q*x_max_sinr``, ``buffer < q*x_max_buffer``, ``delay < q*x_max_delay``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .radio import ScenarioLayout
from .scenario import LayoutError, layout_from_dict, load_layout
from .steering import (
    WATS,
    NormalizationMaxima,
    ParamThresholds,
    ParamWeights,
    SteeringMode,
    SteeringPolicy,
    Wat,
)
from .traffic import ArrivalConfig, TrafficType

NAMED_CONFIGS = ("paper-lb", "paper-sd", "table1")

DEFAULTS: dict[str, Any] = {
    "seed": 42,
    "duration_s": 600.0,
    "dt_s": 0.1,
    "decision_epoch_s": 1.0,
    "delay_cap_ms": 100.0,
    "layout": "default",
    "agv": {"traffic_type": "eMBB", "rate_mbps": 20.0, "end_behavior": None},
    "traffic": {
        "lambda_per_s": 2.0,
        "n_files": 1000,
        "zipf_alpha": 0.8,
        "size_min_bytes": 500_000,
        "size_max_bytes": 20_000_000,
    },
    "network": {
        "efficiency": 0.6,
        "buffer_capacity_bytes": {"5G": 50_000_000, "WiFi": 50_000_000, "LiFi": 50_000_000},
        "max_rate_bps": {"5G": 1.0e9, "WiFi": 1.2e9, "LiFi": 2.5e8},
    },
    "radio": {"shadowing_sigma_db": 0.0, "hysteresis_db": 0.0},
    "policies": {
        "eMBB": {
            "mode": "LB",
            "weights": {"sinr": 1.0, "buffer": 0.7, "delay": 0.2},
            "normalized_threshold": 0.6,
        },
        "URLLC": {
            "mode": "SD",
            "weights": {"sinr": 0.5, "buffer": 0.2, "delay": 1.0},
            "normalized_threshold": 0.6,
        },
    },
}

MODE_FOR_TRAFFIC = {TrafficType.EMBB: SteeringMode.LOAD_BALANCING, TrafficType.URLLC: SteeringMode.SPLIT_DUPLICATE}


class ConfigError(ValueError):
    def __init__(self, problems: list[str], source: str | None = None):
        self.problems = list(problems)
        self.source = source
        where = f"{source}: " if source else ""
        super().__init__(where + "; ".join(self.problems))


@dataclass(frozen=True)
class SimConfig:
    layout: ScenarioLayout
    arrival: ArrivalConfig
    n_files: int
    zipf_alpha: float
    size_min_bytes: int
    size_max_bytes: int
    policies: Mapping[TrafficType, SteeringPolicy]
    agv_traffic_type: TrafficType = TrafficType.EMBB
    agv_rate_bps: float = 20e6
    dt_s: float = 0.1
    decision_epoch_s: float = 1.0
    duration_s: float = 600.0
    seed: int = 42
    delay_cap_ms: float = 100.0
    efficiency: float = 0.6
    buffer_capacity_bytes: Mapping[Wat, int] = field(default_factory=dict)
    max_rate_bps: Mapping[Wat, float] = field(default_factory=dict)
    shadowing_sigma_db: float = 0.0
    hysteresis_db: float = 0.0
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def steps_per_epoch(self) -> int:
        return int(round(self.decision_epoch_s / self.dt_s))

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.duration_s / self.dt_s + 1e-9))

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


# ------------------------------------------------------------------ helpers


def deep_merge(base: Mapping, override: Mapping) -> dict:
    out = copy.deepcopy(dict(base))
    for k, v in (override or {}).items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping) and k != "layout":
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def config_hash(raw: Mapping) -> str:
    blob = json.dumps(raw, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def set_dotted(d: dict, dotted: str, value) -> dict:
    node = d
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return d


def named_config_path(name: str) -> Path:
    if name not in NAMED_CONFIGS:
        raise KeyError(f"unknown named config {name!r}; choose from {', '.join(NAMED_CONFIGS)}")
    return Path(str(resources.files("eatsss") / "data" / f"{name}.yaml"))


def read_raw(source: str | Path | Mapping) -> tuple[dict, Path | None]:
    """Load a raw (unmerged) config mapping and its directory."""
    if isinstance(source, Mapping):
        return dict(source), None
    src = str(source)
    path = named_config_path(src) if src in NAMED_CONFIGS else Path(src)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with path.open() as fh:
        try:
            raw = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError([f"YAML syntax error: {exc}"], str(path)) from exc
    if not isinstance(raw, Mapping):
        raise ConfigError(["top level must be a mapping"], str(path))
    # resolve a relative layout path against the config file
    lay = raw.get("layout")
    if isinstance(lay, str) and lay != "default" and not Path(lay).is_absolute():
        raw = dict(raw, layout=str((path.parent / lay).resolve()))
    return dict(raw), path.parent


def merge_defaults(raw: Mapping) -> dict:
    merged = deep_merge(DEFAULTS, raw)
    # a policy that lists raw thresholds does not inherit the default q
    for key, p in (raw.get("policies") or {}).items():
        if isinstance(p, Mapping) and "thresholds" in p and "normalized_threshold" not in p:
            merged["policies"][key].pop("normalized_threshold", None)
    return merged


def resolve(source: str | Path | Mapping) -> dict:
    """Raw config merged over the defaults."""
    raw, _ = read_raw(source)
    return merge_defaults(raw)


# -------------------------------------------------------------- validation


def _num(problems, path, value, *, kind=float, positive=False, nonneg=False, allow_inf=False):
    try:
        if kind is int:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            v = int(float(value))
        else:
            v = float(value)
    except (TypeError, ValueError):
        problems.append(f"{path}: expected a {'integer' if kind is int else 'number'}, got {value!r}")
        return None
    if kind is float and math.isnan(v) or (not allow_inf and kind is float and math.isinf(v)):
        problems.append(f"{path}: must be finite, got {value!r}")
        return None
    if positive and not v > 0:
        problems.append(f"{path}: must be > 0, got {value!r}")
        return None
    if nonneg and not v >= 0:
        problems.append(f"{path}: must be >= 0, got {value!r}")
        return None
    return v


def _per_wat(problems, path, mapping, **kw) -> dict[Wat, float] | None:
    if not isinstance(mapping, Mapping):
        problems.append(f"{path}: expected a per-WAT mapping")
        return None
    out = {}
    for k, v in mapping.items():
        try:
            wat = Wat.parse(k)
        except ValueError:
            problems.append(f"{path}.{k}: unknown WAT")
            continue
        n = _num(problems, f"{path}.{k}", v, **kw)
        if n is not None:
            out[wat] = n
    missing = [str(w) for w in WATS if w not in out]
    if missing and not any(p.startswith(path) for p in problems):
        problems.append(f"{path}: missing WAT(s) {', '.join(missing)}")
    return out


def _maxima(problems, path, m) -> NormalizationMaxima | None:
    if m is None:
        return NormalizationMaxima()
    if not isinstance(m, Mapping):
        problems.append(f"{path}: expected a mapping")
        return None
    base = NormalizationMaxima()
    vals = {}
    for key, attr in (("sinr_db", "x_max_sinr_db"), ("buffer_pct", "x_max_buffer_pct"), ("delay_ms", "x_max_delay_ms")):
        vals[attr] = _num(problems, f"{path}.{key}", m.get(key, getattr(base, attr)), positive=True)
    if None in vals.values():
        return None
    return NormalizationMaxima(**vals)


WEIGHT_KEYS = ("sinr", "buffer", "delay")


def build_policy(problems: list[str], path: str, p: Mapping) -> SteeringPolicy | None:
    if not isinstance(p, Mapping):
        problems.append(f"{path}: expected a mapping")
        return None
    n_before = len(problems)
    try:
        mode = SteeringMode.parse(p.get("mode", "LB"))
    except ValueError as exc:
        problems.append(f"{path}.mode: {exc}")
        mode = None
    w = p.get("weights") or {}
    vals = [_num(problems, f"{path}.weights.{k}", w.get(k), allow_inf=True) for k in WEIGHT_KEYS]
    weights = ParamWeights(*(1.0 if v is None else v for v in vals))
    for msg in weights.violations(f"{path}.weights"):
        for k in WEIGHT_KEYS:
            msg = msg.replace(f".weights.w_{k}:", f".weights.{k}:")
        problems.append(msg)
    maxima = _maxima(problems, f"{path}.maxima", p.get("maxima"))
    per_wat = None
    if p.get("maxima_per_wat"):
        per_wat = {}
        for k, m in p["maxima_per_wat"].items():
            try:
                wat = Wat.parse(k)
            except ValueError:
                problems.append(f"{path}.maxima_per_wat.{k}: unknown WAT")
                continue
            per_wat[wat] = _maxima(problems, f"{path}.maxima_per_wat.{k}", {**_as_dict(p.get("maxima")), **m})
    score = p.get("score_threshold")
    if score is not None:
        score = _num(problems, f"{path}.score_threshold", score)
    if "thresholds" in p and "normalized_threshold" in p:
        problems.append(f"{path}: give either thresholds or normalized_threshold, not both")
    if len(problems) > n_before or mode is None or maxima is None:
        return None

    if "thresholds" in p:
        th = {}
        raw_th = p["thresholds"] or {}
        for k, t in raw_th.items():
            try:
                wat = Wat.parse(k)
            except ValueError:
                problems.append(f"{path}.thresholds.{k}: unknown WAT")
                continue
            vals = [
                _num(problems, f"{path}.thresholds.{k}.{name}", t.get(name), allow_inf=True)
                for name in ("sinr_db", "buffer_pct", "delay_ms")
            ]
            if None not in vals:
                th[wat] = ParamThresholds(*vals)
        policy = SteeringPolicy(mode, weights, th, maxima, per_wat, score)
    else:
        q = _num(problems, f"{path}.normalized_threshold", p.get("normalized_threshold", 0.6), nonneg=True)
        if q is None:
            return None
        policy = SteeringPolicy.from_normalized_threshold(mode, weights, q, maxima, per_wat)
        policy = SteeringPolicy(policy.mode, policy.weights, policy.thresholds, maxima, per_wat, score)
    for msg in policy.violations(path):
        if msg.startswith(f"{path}.weights."):
            continue  # already reported under the config key names
        for attr, key in FIELD_NAMES.items():
            msg = msg.replace(f".{attr}:", f".{key}:")
        problems.append(msg)
    return policy


# dataclass attribute -> config key, for error messages
FIELD_NAMES = {
    "t_sinr_db": "sinr_db", "t_buffer_pct": "buffer_pct", "t_delay_ms": "delay_ms",
    "x_max_sinr_db": "sinr_db", "x_max_buffer_pct": "buffer_pct", "x_max_delay_ms": "delay_ms",
}


def _as_dict(x):
    return dict(x) if isinstance(x, Mapping) else {}


def build_config(source: str | Path | Mapping, seed: int | None = None) -> SimConfig:
    """Merge, validate and build a :class:`SimConfig`; raises ConfigError listing every problem."""
    raw, _ = read_raw(source)
    merged = merge_defaults(raw)
    if seed is not None:
        merged["seed"] = int(seed)
    cfg, problems = _build(merged)
    if problems:
        raise ConfigError(problems, None if isinstance(source, Mapping) else str(source))
    return cfg


def config_violations(source: str | Path | Mapping) -> list[str]:
    raw, _ = read_raw(source)
    return _build(merge_defaults(raw))[1]


def _build(d: dict) -> tuple[SimConfig | None, list[str]]:
    problems: list[str] = []
    known = set(DEFAULTS)
    for k in d:
        if k not in known:
            problems.append(f"{k}: unknown key")

    seed = _num(problems, "seed", d["seed"], kind=int, nonneg=True)
    duration = _num(problems, "duration_s", d["duration_s"], nonneg=True)
    dt = _num(problems, "dt_s", d["dt_s"], positive=True)
    epoch = _num(problems, "decision_epoch_s", d["decision_epoch_s"], positive=True)
    cap = _num(problems, "delay_cap_ms", d["delay_cap_ms"], positive=True)
    if dt and epoch:
        ratio = epoch / dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            problems.append(f"decision_epoch_s: {epoch} is not an integer multiple of dt_s={dt}")

    layout = None
    try:
        lay = d["layout"]
        layout = layout_from_dict(lay) if isinstance(lay, Mapping) else load_layout(lay)
    except (LayoutError, OSError, yaml.YAMLError) as exc:
        problems.append(f"layout: {exc}")
    agv = d.get("agv") or {}
    if layout is not None:
        end = agv.get("end_behavior")
        if end is not None:
            layout = ScenarioLayout(layout.bounds_m, layout.nodes, layout.static_users, layout.agv_path,
                                    layout.agv_speed_mps, str(end), layout.agv_user_id)
        problems.extend(layout.violations())
    try:
        agv_type = TrafficType.parse(agv.get("traffic_type", "eMBB"))
    except ValueError as exc:
        problems.append(f"agv.traffic_type: {exc}")
        agv_type = None
    agv_rate = _num(problems, "agv.rate_mbps", agv.get("rate_mbps", 20.0), nonneg=True)

    tr = d["traffic"]
    lam = _num(problems, "traffic.lambda_per_s", tr.get("lambda_per_s"), positive=True)
    n_files = _num(problems, "traffic.n_files", tr.get("n_files"), kind=int, positive=True)
    alpha = _num(problems, "traffic.zipf_alpha", tr.get("zipf_alpha"), nonneg=True)
    smin = _num(problems, "traffic.size_min_bytes", tr.get("size_min_bytes"), kind=int, positive=True)
    smax = _num(problems, "traffic.size_max_bytes", tr.get("size_max_bytes"), kind=int, positive=True)
    if smin and smax and smin > smax:
        problems.append("traffic.size_min_bytes: must not exceed size_max_bytes")

    net = d["network"]
    eff = _num(problems, "network.efficiency", net.get("efficiency"), positive=True)
    if eff is not None and eff > 1:
        problems.append(f"network.efficiency: must lie in (0, 1], got {eff}")
    capacity = _per_wat(problems, "network.buffer_capacity_bytes", net.get("buffer_capacity_bytes"), kind=int, positive=True)
    max_rate = _per_wat(problems, "network.max_rate_bps", net.get("max_rate_bps"), positive=True)

    radio = d["radio"]
    sigma = _num(problems, "radio.shadowing_sigma_db", radio.get("shadowing_sigma_db", 0.0), nonneg=True)
    hyst = _num(problems, "radio.hysteresis_db", radio.get("hysteresis_db", 0.0), nonneg=True)

    policies = {}
    for key, p in (d.get("policies") or {}).items():
        try:
            tt = TrafficType.parse(key)
        except ValueError:
            problems.append(f"policies.{key}: unknown traffic type")
            continue
        pol = build_policy(problems, f"policies.{key}", p)
        try:
            mode = SteeringMode.parse(p.get("mode", "LB")) if isinstance(p, Mapping) else None
        except ValueError:
            mode = None  # reported by build_policy
        if mode is not None and mode is not MODE_FOR_TRAFFIC[tt]:
            problems.append(f"policies.{key}.mode: {tt} traffic uses {MODE_FOR_TRAFFIC[tt]} steering")
        if pol is not None:
            policies[tt] = pol
    for tt in TrafficType:
        if tt not in policies and not any(p.startswith(f"policies.{tt}") for p in problems):
            problems.append(f"policies.{tt}: missing")

    if problems:
        return None, problems
    cfg = SimConfig(
        layout=layout,
        arrival=ArrivalConfig(lam, duration, seed),
        n_files=n_files,
        zipf_alpha=alpha,
        size_min_bytes=smin,
        size_max_bytes=smax,
        policies=policies,
        agv_traffic_type=agv_type,
        agv_rate_bps=agv_rate * 1e6,
        dt_s=dt,
        decision_epoch_s=epoch,
        duration_s=duration,
        seed=seed,
        delay_cap_ms=cap,
        efficiency=eff,
        buffer_capacity_bytes=capacity,
        max_rate_bps=max_rate,
        shadowing_sigma_db=sigma,
        hysteresis_db=hyst,
        raw=d,
    )
    return cfg, []


def dump_config(d: Mapping, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        yaml.safe_dump(json.loads(json.dumps(d, default=str)), fh, sort_keys=True)
    return path
