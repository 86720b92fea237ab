"""Epoch-driven simulator: AGV motion, arrivals, association, telemetry, steering, queues."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .config import SimConfig, build_config, deep_merge, read_raw, set_dotted
from .network import NetworkState, Routing, serve_rate_bps
from .radio import all_wats_radio
from .steering import WATS, SteeringDecision, SteeringMode, TelemetrySample, Wat, decide_all
from .traffic import ContentLibrary, Request, TrafficType, build_library, generate_requests

log = logging.getLogger(__name__)

SIG_DIGITS = 6


class SimulationError(RuntimeError):
    pass


def quantize(x: float) -> float:
    """Round to the trace precision so written and in-memory values agree."""
    if not math.isfinite(x):
        return x
    return float(f"{x:.{SIG_DIGITS}g}")


@dataclass
class EpochRecord:
    timestamp_s: float
    agv_position: tuple[float, float, float]
    telemetry: dict[int, dict[Wat, TelemetrySample]]
    decisions: dict[int, SteeringDecision]
    routing: dict[int, Routing]  # what was actually applied (fallback included)
    buffer_pct: dict[tuple[Wat, int], float]  # non-empty nodes only
    flow_bytes: dict[int, int]  # per-user bytes queued anywhere
    totals: dict[str, int]


@dataclass
class SimTrace:
    config: SimConfig
    records: list[EpochRecord] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    library: ContentLibrary | None = None
    requests: list[Request] = field(default_factory=list)


def sub_rngs(seed: int) -> dict[str, np.random.Generator]:
    """Independent streams so toggling one random feature leaves the others alone."""
    names = ("arrivals", "files", "sizes", "shadowing")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def fallback_routing(decision: SteeringDecision, samples: Mapping[Wat, TelemetrySample]) -> Routing | None:
    """Route to the covered WAT with the highest SINR when steering picked nothing."""
    covered = [s for s in samples.values() if s.covered]
    if not covered:
        return None
    best = max(covered, key=lambda s: (s.sinr_db, -WATS.index(s.wat)))
    return Routing.single(decision.mode, best.wat)


def run(cfg: SimConfig, keep_records: bool = True) -> SimTrace:
    """Simulate ``cfg`` and return the per-epoch trace plus a run summary."""
    rngs = sub_rngs(cfg.seed)
    layout = cfg.layout
    library = build_library(cfg.n_files, cfg.zipf_alpha, cfg.size_min_bytes, cfg.size_max_bytes, rngs["sizes"])
    static_ids = [u for u, _ in layout.static_users]
    agv = layout.agv_user_id
    requests = (
        generate_requests(cfg.arrival, library, static_ids, rngs["arrivals"], rngs["files"])
        if static_ids else []
    )
    user_ids = [agv] + static_ids
    static_pos = np.array([p for _, p in layout.static_users], dtype=float).reshape(-1, 3)

    radios = all_wats_radio(layout)
    node_keys = {wat: [(wat, int(i)) for i in radios[wat].node_ids] for wat in WATS}
    bandwidth = {wat: np.array([n.bandwidth_hz for n in radios[wat].nodes]) for wat in WATS}
    net = NetworkState({k: cfg.buffer_capacity_bytes[k[0]] for wat in WATS for k in node_keys[wat]})

    policy_for = {u: cfg.policies[TrafficType.EMBB] for u in static_ids}
    policy_for[agv] = cfg.policies[cfg.agv_traffic_type]
    traffic_for = {u: TrafficType.EMBB for u in static_ids}
    traffic_for[agv] = cfg.agv_traffic_type

    trace = SimTrace(cfg, library=library, requests=requests)
    serving_idx = {wat: None for wat in WATS}
    routing: dict[int, Routing | None] = {}
    rates: dict[tuple[int, Wat], float] = {}
    req_i = 0
    agv_carry = 0.0
    agv_bytes_per_step = cfg.agv_rate_bps * cfg.dt_s / 8.0
    spe = cfg.steps_per_epoch
    n_fallback = 0

    for step in range(cfg.n_steps):
        t = round(step * cfg.dt_s, 9)
        if step % spe == 0:
            epoch = step // spe
            t_epoch = round(epoch * cfg.decision_epoch_s, 6)
            try:
                agv_pos = layout.agv_position(t_epoch)
                positions = np.vstack([agv_pos[None, :], static_pos])
                telemetry, rates = _measure(cfg, net, radios, node_keys, bandwidth, serving_idx,
                                            positions, user_ids, t_epoch, rngs["shadowing"])
                decisions = decide_all(user_ids, telemetry, policy_for)
            except Exception as exc:
                raise SimulationError(f"epoch {epoch} (t={t_epoch} s): {exc}") from exc
            routing = {}
            for d in decisions:
                if d.degenerate:
                    routing[d.user_id] = fallback_routing(d, telemetry[d.user_id])
                    n_fallback += 1
                else:
                    routing[d.user_id] = Routing.from_decision(d)
            err = net.conservation_error()
            if err:
                raise SimulationError(f"epoch {epoch} (t={t_epoch} s): byte conservation off by {err}")
            if keep_records:
                trace.records.append(EpochRecord(
                    timestamp_s=t_epoch,
                    agv_position=tuple(float(v) for v in agv_pos),
                    telemetry=telemetry,
                    decisions={d.user_id: d for d in decisions},
                    routing={u: r for u, r in routing.items() if r is not None},
                    buffer_pct={k: q.buffer_pct for k, q in net.queues.items() if q.total_queued_bytes},
                    flow_bytes={u: net.pending_bytes(u) for u in user_ids if u in net.serving},
                    totals=net.totals(),
                ))

        t_next = round((step + 1) * cfg.dt_s, 9)
        # requests due in [t, t_next)
        while req_i < len(requests) and requests[req_i].arrival_time_s < t_next:
            r = requests[req_i]
            req_i += 1
            _admit(net, routing.get(r.user_id), r.user_id, r.size_bytes, r.arrival_time_s, r.file_id, str(r.traffic_type))
        # AGV constant-rate stream; the fractional byte carries over
        agv_carry += agv_bytes_per_step
        chunk = int(agv_carry)
        agv_carry -= chunk
        if chunk:
            _admit(net, routing.get(agv), agv, chunk, t, 0, str(cfg.agv_traffic_type))
        net.advance(cfg.dt_s, rates, t_next)

    trace.summary = run_summary(cfg, net, trace, n_fallback)
    return trace


def _admit(net: NetworkState, routing: Routing | None, user: int, nbytes: int, now: float,
           file_id: int, traffic_type: str) -> None:
    if routing is None:
        # no decision yet or no coverage anywhere: the bytes are lost
        routing = Routing(SteeringMode.LOAD_BALANCING, {})
    net.enqueue(user, routing, nbytes, now, file_id, traffic_type)


def _measure(cfg, net, radios, node_keys, bandwidth, serving_idx, positions, user_ids, t, shadow_rng):
    telemetry: dict[int, dict[Wat, TelemetrySample]] = {u: {} for u in user_ids}
    rates: dict[tuple[int, Wat], float] = {}
    links = {}
    for wat in WATS:
        radio = radios[wat]
        shadow = None
        if cfg.shadowing_sigma_db > 0 and len(radio.nodes):
            shadow = shadow_rng.normal(0.0, cfg.shadowing_sigma_db, (len(positions), len(radio.nodes)))
        serving, rx, rsrp, sinr = radio.measure(positions, serving_idx[wat], cfg.hysteresis_db, shadow)
        serving_idx[wat] = serving
        links[wat] = (serving, rsrp, sinr)
        for i, u in enumerate(user_ids):
            s = int(serving[i])
            net.set_serving(u, wat, node_keys[wat][s] if s >= 0 else None)
            if s >= 0:
                rates[(u, wat)] = serve_rate_bps(
                    quantize(float(sinr[i])), float(bandwidth[wat][s]), cfg.efficiency, cfg.max_rate_bps.get(wat)
                )
    for wat in WATS:
        serving, rsrp, sinr = links[wat]
        for i, u in enumerate(user_ids):
            s = int(serving[i])
            if s < 0:
                telemetry[u][wat] = TelemetrySample(wat, -1, -math.inf, -math.inf, 0.0, cfg.delay_cap_ms, t)
                continue
            key = node_keys[wat][s]
            delay = net.user_delay_ms(u, wat, rates, cfg.delay_cap_ms)
            telemetry[u][wat] = TelemetrySample(
                wat, key[1], quantize(float(rsrp[i])), quantize(float(sinr[i])),
                quantize(net.buffer_pct(key)), quantize(delay), t,
            )
    return telemetry, rates


def run_summary(cfg: SimConfig, net: NetworkState, trace: SimTrace, n_fallback: int) -> dict[str, Any]:
    totals = net.totals()
    done = [f for f in net.iter_files() if f.done and f.intact and f.file_id > 0]
    ct = np.array([f.completed_s - f.arrival_s for f in done]) if done else np.array([])
    n_req = sum(1 for f in net.iter_files() if f.file_id > 0)
    per_node_drops = {f"{k[0]}:{k[1]}": q.dropped_bytes for k, q in net.queues.items() if q.dropped_bytes}
    return {
        "seed": cfg.seed,
        "config_hash": cfg.config_hash,
        "code_version": code_version(),
        "duration_s": cfg.duration_s,
        "epochs": len(trace.records),
        "users": 1 + len(cfg.layout.static_users),
        "requests": n_req,
        "bytes": totals,
        "conservation_error": net.conservation_error(),
        "fallback_decisions": n_fallback,
        "drops_by_node": per_node_drops,
        "flows": {
            "completed_intact": int(len(done)),
            "completion_s_mean": float(ct.mean()) if len(ct) else None,
            "completion_s_p50": float(np.percentile(ct, 50)) if len(ct) else None,
            "completion_s_p95": float(np.percentile(ct, 95)) if len(ct) else None,
        },
    }


def code_version() -> str:
    from importlib import metadata

    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# ------------------------------------------------------------------- sweeps

# shorthand keys expanded to every traffic class
SWEEP_ALIASES = {
    "normalized_threshold": ("policies.eMBB.normalized_threshold", "policies.URLLC.normalized_threshold"),
}


def point_label(point: Mapping[str, Any]) -> str:
    return ",".join(f"{k}={point[k]}" for k in sorted(point)) or "base"


def derived_seed(base_seed: int, point: Mapping[str, Any]) -> int:
    blob = json.dumps({"seed": base_seed, "point": point}, sort_keys=True, default=str)
    return int.from_bytes(hashlib.sha256(blob.encode()).digest()[:4], "big") & 0x7FFFFFFF


def apply_point(raw: Mapping[str, Any], point: Mapping[str, Any]) -> dict:
    """Config mapping with the grid point applied and its derived seed set."""
    merged = deep_merge({}, raw)
    for key, value in point.items():
        for dotted in SWEEP_ALIASES.get(key, (key,)):
            set_dotted(merged, dotted, value)
    if "seed" not in point:
        merged["seed"] = derived_seed(int(raw.get("seed", 42)), point)
    return merged


def expand_grid(grid: Mapping[str, Sequence] | Sequence[Mapping[str, Any]]) -> list[dict]:
    """A mapping of key -> values becomes its Cartesian product; a list passes through."""
    if isinstance(grid, Mapping):
        if not grid:
            return []
        keys = sorted(grid)
        points = [{}]
        for k in keys:
            points = [{**p, k: v} for p in points for v in grid[k]]
        return points
    return [dict(p) for p in grid]


@dataclass
class SweepResult:
    point: dict
    seed: int
    trace: SimTrace | None = None
    error: str | None = None


def _run_point(raw: dict) -> SimTrace:
    return run(build_config(raw))


def sweep(base: str | Mapping, grid, threads: int = 1) -> dict[str, SweepResult]:
    """One independent run per grid point; failures are reported per point."""
    raw, _ = read_raw(base)
    points = expand_grid(grid)
    raws = [apply_point(raw, p) for p in points]
    out: dict[str, SweepResult] = {}
    if threads > 1 and len(raws) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            futures = [ex.submit(_run_point, r) for r in raws]
            for p, r, fut in zip(points, raws, futures):
                try:
                    out[point_label(p)] = SweepResult(p, r["seed"], fut.result())
                except Exception as exc:  # noqa: BLE001 - reported per point
                    out[point_label(p)] = SweepResult(p, r["seed"], error=f"{type(exc).__name__}: {exc}")
    else:
        for p, r in zip(points, raws):
            try:
                out[point_label(p)] = SweepResult(p, r["seed"], _run_point(r))
            except Exception as exc:  # noqa: BLE001
                out[point_label(p)] = SweepResult(p, r["seed"], error=f"{type(exc).__name__}: {exc}")
    return out
