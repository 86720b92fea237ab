"""Scenario layout files (YAML).

Schema::

    bounds_m: [xmin, ymin, xmax, ymax]
    ue_height_m: 1.5
    wat_defaults:                    # per WAT, applied to every node of it
      5G: {tx_power_dbm, carrier_hz, bandwidth_hz, height_m, params: {...}}
    nodes:                           # explicit nodes; z falls back to height_m
      - {wat: 5G, id: 1, position: [x, y] | [x, y, z], tx_power_dbm?, params?}
    lifi_along_path:                 # optional LiFi chain generated on the AGV path
      {spacing_m: 3.0, offset_m: 0.0, first_id: 1}
    static_users:                    # explicit list or a seeded uniform draw
      random: {count: 100, seed: 7, first_id: 1}
      list: [{id: 1, position: [x, y]}]
    agv: {user_id: 0, waypoints: [[x, y], ...], speed_mps: 0.7, end_behavior: stop}
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .radio import AccessNode, ScenarioLayout, points_along
from .steering import Wat


class LayoutError(ValueError):
    pass


def default_layout_path() -> Path:
    return Path(str(resources.files("eatsss") / "data" / "factory.yaml"))


def load_layout(source: str | Path | Mapping | None = None) -> ScenarioLayout:
    """Build a layout from a YAML file, a mapping, or the shipped default."""
    if source is None or source == "default":
        source = default_layout_path()
    if isinstance(source, Mapping):
        return layout_from_dict(source)
    with Path(source).open() as fh:
        return layout_from_dict(yaml.safe_load(fh))


def _xyz(pos, z_default: float) -> tuple[float, float, float]:
    pos = [float(v) for v in pos]
    if len(pos) == 2:
        pos.append(z_default)
    if len(pos) != 3:
        raise LayoutError(f"position must have 2 or 3 coordinates, got {pos}")
    return tuple(pos)


def layout_from_dict(d: Mapping[str, Any]) -> ScenarioLayout:
    try:
        bounds = tuple(float(v) for v in d["bounds_m"])
        ue_h = float(d.get("ue_height_m", 1.5))
        defaults = {Wat.parse(k): v for k, v in (d.get("wat_defaults") or {}).items()}

        def make_node(wat: Wat, node_id: int, pos, spec: Mapping) -> AccessNode:
            base = defaults.get(wat, {})
            merged = {**base, **spec}
            params = {**(base.get("params") or {}), **(spec.get("params") or {})}
            return AccessNode(
                node_id=int(node_id),
                wat=wat,
                position_m=_xyz(pos, float(merged.get("height_m", 3.0))),
                tx_power_dbm=float(merged["tx_power_dbm"]),
                carrier_hz=float(merged["carrier_hz"]),
                bandwidth_hz=float(merged["bandwidth_hz"]),
                params=params,
            )

        nodes = [make_node(Wat.parse(n["wat"]), n["id"], n["position"], n) for n in d.get("nodes") or []]

        agv = d["agv"]
        path = np.array([_xyz(p, ue_h) for p in agv["waypoints"]], dtype=float)

        chain = d.get("lifi_along_path")
        if chain:
            first = int(chain.get("first_id", 1))
            pts = points_along(path[:, :2], float(chain.get("spacing_m", 3.0)), float(chain.get("offset_m", 0.0)))
            for k, (x, y) in enumerate(pts):
                nodes.append(make_node(Wat.LIFI, first + k, (x, y), chain))

        users_spec = d.get("static_users") or {}
        users: list[tuple[int, tuple[float, float, float]]] = []
        for u in users_spec.get("list") or []:
            users.append((int(u["id"]), _xyz(u["position"], ue_h)))
        rnd = users_spec.get("random")
        if rnd:
            rng = np.random.default_rng(int(rnd.get("seed", 0)))
            n = int(rnd["count"])
            xs = rng.uniform(bounds[0], bounds[2], n)
            ys = rng.uniform(bounds[1], bounds[3], n)
            first = int(rnd.get("first_id", 1))
            users.extend((first + i, (float(xs[i]), float(ys[i]), ue_h)) for i in range(n))

        return ScenarioLayout(
            bounds_m=bounds,
            nodes=tuple(nodes),
            static_users=tuple(users),
            agv_path=path,
            agv_speed_mps=float(agv.get("speed_mps", 0.7)),
            agv_end_behavior=str(agv.get("end_behavior", "stop")),
            agv_user_id=int(agv.get("user_id", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise LayoutError(f"malformed layout: {exc!r}") from exc
