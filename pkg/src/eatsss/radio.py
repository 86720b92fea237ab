"""Geometry, path loss, SINR and cell association for the three access networks.

5G and Wi-Fi use a log-distance path-loss law.  LiFi uses a line-of-sight
Lambertian optical channel whose DC gain is expressed as an equivalent dB
loss; a receiver outside the photodiode field of view gets no signal.

Received powers are total in-band powers.  The reported RSRP/RSS is the
per-subcarrier power (total minus ``10*log10(bandwidth / subcarrier
spacing)``), which is how the measured values compare with cellular and
Wi-Fi reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .steering import WATS, Wat

THERMAL_NOISE_DBM_HZ = -174.0

# per-WAT model defaults; a node's own params override these
DEFAULT_PARAMS: dict[Wat, dict] = {
    Wat.FIVE_G: {
        "model": "log_distance",
        "pl0_db": 43.3,
        "exponent": 3.0,
        "d0_m": 1.0,
        "noise_figure_db": 7.0,
        "subcarrier_spacing_hz": 30e3,
        "channel": 0,
        "activity": 1.0,
    },
    Wat.WIFI: {
        "model": "log_distance",
        "pl0_db": 46.4,
        "exponent": 3.0,
        "d0_m": 1.0,
        "noise_figure_db": 7.0,
        "subcarrier_spacing_hz": 312.5e3,
        "channel": 0,
        "activity": 1.0,
    },
    Wat.LIFI: {
        "model": "lambertian",
        "semi_angle_deg": 60.0,
        "area_m2": 1e-4,
        "fov_deg": 45.0,
        "filter_gain": 1.0,
        "concentrator_gain": 1.0,
        "noise_figure_db": 8.0,
        "subcarrier_spacing_hz": 312.5e3,
        "channel": 0,
        "activity": 1.0,
    },
}


@dataclass(frozen=True)
class AccessNode:
    node_id: int
    wat: Wat
    position_m: tuple[float, float, float]
    tx_power_dbm: float
    carrier_hz: float
    bandwidth_hz: float
    params: Mapping[str, object] = field(default_factory=dict)

    def param(self, key: str):
        if key in self.params:
            return self.params[key]
        return DEFAULT_PARAMS[self.wat][key]

    @property
    def noise_dbm(self) -> float:
        return THERMAL_NOISE_DBM_HZ + 10 * math.log10(self.bandwidth_hz) + float(self.param("noise_figure_db"))

    @property
    def rsrp_offset_db(self) -> float:
        return 10 * math.log10(self.bandwidth_hz / float(self.param("subcarrier_spacing_hz")))


@dataclass(frozen=True, slots=True)
class LinkMeasurement:
    node_id: int
    rsrp_dbm: float
    sinr_db: float
    rx_dbm: float = -math.inf

    @property
    def covered(self) -> bool:
        return self.node_id >= 0


NO_COVERAGE = LinkMeasurement(-1, -math.inf, -math.inf)


@dataclass(frozen=True)
class ScenarioLayout:
    bounds_m: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    nodes: tuple[AccessNode, ...]
    static_users: tuple[tuple[int, tuple[float, float, float]], ...]
    agv_path: np.ndarray  # (K, 3) waypoints
    agv_speed_mps: float = 0.7
    agv_end_behavior: str = "stop"
    agv_user_id: int = 0

    def nodes_of(self, wat: Wat) -> list[AccessNode]:
        return sorted((n for n in self.nodes if n.wat is wat), key=lambda n: n.node_id)

    @property
    def path_length_m(self) -> float:
        return path_length(self.agv_path)

    def agv_position(self, t_s: float) -> np.ndarray:
        return agv_position(t_s, self.agv_path, self.agv_speed_mps, self.agv_end_behavior)

    def violations(self) -> list[str]:
        out = []
        xmin, ymin, xmax, ymax = self.bounds_m
        if not (xmax > xmin and ymax > ymin):
            out.append("layout.bounds_m: empty rectangle")

        def inside(p):
            return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax

        seen = set()
        for n in self.nodes:
            tag = f"layout.nodes[{n.wat}:{n.node_id}]"
            if (n.wat, n.node_id) in seen:
                out.append(f"{tag}: duplicate node id")
            seen.add((n.wat, n.node_id))
            if not n.bandwidth_hz > 0:
                out.append(f"{tag}.bandwidth_hz: must be > 0")
            if not inside(n.position_m):
                out.append(f"{tag}.position_m: outside factory bounds")
        for wat in (Wat.FIVE_G, Wat.WIFI):
            if not self.nodes_of(wat):
                out.append(f"layout.nodes: no {wat} node")
        for uid, pos in self.static_users:
            if not inside(pos):
                out.append(f"layout.static_users[{uid}]: outside factory bounds")
        if uid_dupes := _dupes([u for u, _ in self.static_users] + [self.agv_user_id]):
            out.append(f"layout.static_users: duplicate user id(s) {sorted(uid_dupes)}")
        if len(self.agv_path) < 2:
            out.append("layout.agv.waypoints: need at least 2 waypoints")
        if not self.agv_speed_mps > 0:
            out.append("layout.agv.speed_mps: must be > 0")
        if self.agv_end_behavior not in ("stop", "loop"):
            out.append("layout.agv.end_behavior: must be 'stop' or 'loop'")
        return out


def _dupes(items):
    seen, dup = set(), set()
    for x in items:
        (dup if x in seen else seen).add(x)
    return dup


# ---------------------------------------------------------------- path loss


def _lambertian_order(semi_angle_deg: float) -> float:
    return -math.log(2) / math.log(math.cos(math.radians(semi_angle_deg)))


def _pathloss_matrix(nodes: Sequence[AccessNode], rx: np.ndarray) -> np.ndarray:
    """Path loss in dB, shape (n_rx, n_nodes); ``inf`` where there is no link."""
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    out = np.empty((rx.shape[0], len(nodes)))
    for j, node in enumerate(nodes):
        tx = np.asarray(node.position_m, dtype=float)
        delta = tx[None, :] - rx
        d = np.sqrt(np.sum(delta**2, axis=1))
        if np.any(d == 0):
            raise ValueError(f"zero distance to node {node.wat}:{node.node_id}")
        model = node.param("model")
        if model == "log_distance":
            pl0, n, d0 = (float(node.param(k)) for k in ("pl0_db", "exponent", "d0_m"))
            out[:, j] = pl0 + 10 * n * np.log10(d / d0)
        elif model == "lambertian":
            out[:, j] = _lambertian_loss(node, delta, d)
        else:
            raise ValueError(f"unknown path-loss model {model!r}")
    return out


def _lambertian_loss(node: AccessNode, delta: np.ndarray, d: np.ndarray) -> np.ndarray:
    # AP faces straight down, photodiode straight up: both angles share cos = dz/d
    m = _lambertian_order(float(node.param("semi_angle_deg")))
    area = float(node.param("area_m2"))
    fov = math.radians(float(node.param("fov_deg")))
    ts = float(node.param("filter_gain"))
    g = float(node.param("concentrator_gain"))
    cos_a = delta[:, 2] / d
    visible = (cos_a > 0) & (np.arccos(np.clip(cos_a, -1.0, 1.0)) <= fov + 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = (m + 1) * area / (2 * math.pi * d**2) * np.power(np.clip(cos_a, 0, None), m) * ts * g * cos_a
        loss = np.where(visible & (gain > 0), -10 * np.log10(gain), np.inf)
    return loss


def pathloss_db(wat: Wat, tx: AccessNode, rx_position, model_params: Mapping | None = None) -> float:
    if tx.wat is not wat:
        raise ValueError(f"node {tx.node_id} is {tx.wat}, not {wat}")
    if model_params:
        tx = AccessNode(tx.node_id, tx.wat, tx.position_m, tx.tx_power_dbm, tx.carrier_hz,
                        tx.bandwidth_hz, {**tx.params, **model_params})
    return float(_pathloss_matrix([tx], np.asarray(rx_position, dtype=float))[0, 0])


def rx_power_dbm(tx: AccessNode, rx_position) -> float:
    return tx.tx_power_dbm - pathloss_db(tx.wat, tx, rx_position)


# ------------------------------------------------------------------- SINR


def cochannel_mask(nodes: Sequence[AccessNode]) -> np.ndarray:
    """mask[i, j] is True when node j interferes with a user served by node i."""
    n = len(nodes)
    mask = np.zeros((n, n), dtype=bool)
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            if i != j and a.wat is b.wat:
                # one 3.5 GHz carrier for all gNBs; Wi-Fi/LiFi follow the channel plan
                mask[i, j] = a.wat is Wat.FIVE_G or a.param("channel") == b.param("channel")
    return mask


def _sinr_from_rx(rx_dbm: np.ndarray, serving: np.ndarray, nodes, mask) -> np.ndarray:
    """SINR (dB) per receiver given the (n_rx, n_nodes) rx power matrix."""
    p = np.power(10.0, rx_dbm / 10.0)  # -inf dBm -> 0 mW
    activity = np.array([float(n.param("activity")) for n in nodes])
    noise = np.power(10.0, np.array([n.noise_dbm for n in nodes]) / 10.0)
    rows = np.arange(len(serving))
    interference = np.sum(p * activity[None, :] * mask[serving], axis=1)
    s = p[rows, serving]
    with np.errstate(divide="ignore"):
        return 10 * np.log10(s / (interference + noise[serving]))


def sinr_db(user_pos, serving: AccessNode, all_nodes: Iterable[AccessNode], noise_params: Mapping | None = None) -> float:
    """SINR of ``serving`` at ``user_pos`` against its co-channel neighbours.

    ``noise_params`` may override ``noise_figure_db`` or give an absolute
    ``noise_dbm``.
    """
    nodes = [n for n in all_nodes if n.wat is serving.wat]
    idx = next((i for i, n in enumerate(nodes) if n.node_id == serving.node_id), None)
    if idx is None:
        raise ValueError("serving node is not among all_nodes")
    if noise_params:
        if "noise_dbm" in noise_params:
            nf = noise_params["noise_dbm"] - THERMAL_NOISE_DBM_HZ - 10 * math.log10(serving.bandwidth_hz)
        else:
            nf = noise_params["noise_figure_db"]
        nodes[idx] = AccessNode(serving.node_id, serving.wat, serving.position_m, serving.tx_power_dbm,
                                serving.carrier_hz, serving.bandwidth_hz, {**serving.params, "noise_figure_db": nf})
    rx = _rx_matrix(nodes, np.atleast_2d(np.asarray(user_pos, dtype=float)))
    return float(_sinr_from_rx(rx, np.array([idx]), nodes, cochannel_mask(nodes))[0])


def _rx_matrix(nodes: Sequence[AccessNode], rx: np.ndarray) -> np.ndarray:
    tx = np.array([n.tx_power_dbm for n in nodes])
    return tx[None, :] - _pathloss_matrix(nodes, rx)


# ------------------------------------------------------------ association


class WatRadio:
    """Vectorized link budget for every node of one WAT.

    Used by the simulator to measure many receivers at once; the scalar
    helpers above go through the same code.
    """

    def __init__(self, wat: Wat, nodes: Sequence[AccessNode]):
        self.wat = wat
        self.nodes = sorted(nodes, key=lambda n: n.node_id)
        self.node_ids = np.array([n.node_id for n in self.nodes], dtype=int)
        self.mask = cochannel_mask(self.nodes)
        self.rsrp_offset = np.array([n.rsrp_offset_db for n in self.nodes])

    def rx_dbm(self, positions: np.ndarray, shadowing_db: np.ndarray | None = None) -> np.ndarray:
        if not self.nodes:
            return np.full((len(positions), 0), -np.inf)
        rx = _rx_matrix(self.nodes, positions)
        if shadowing_db is not None:
            rx = rx - shadowing_db
        return rx

    def associate(
        self,
        rx_dbm: np.ndarray,
        current: np.ndarray | None = None,
        hysteresis_db: float = 0.0,
    ) -> np.ndarray:
        """Serving column index per receiver, or -1 without coverage.

        The strongest node wins (lowest id on ties because nodes are sorted
        by id).  With a current serving index, a challenger must beat it by
        ``hysteresis_db``.
        """
        if rx_dbm.shape[1] == 0:
            return np.full(rx_dbm.shape[0], -1, dtype=int)
        best = np.argmax(rx_dbm, axis=1)
        rows = np.arange(rx_dbm.shape[0])
        if current is not None and hysteresis_db > 0:
            keep = current >= 0
            cur = np.where(keep, current, 0)
            keep &= np.isfinite(rx_dbm[rows, cur])
            keep &= rx_dbm[rows, best] < rx_dbm[rows, cur] + hysteresis_db
            best = np.where(keep, cur, best)
        return np.where(np.isfinite(rx_dbm[rows, best]), best, -1)

    def sinr_db(self, rx_dbm: np.ndarray, serving: np.ndarray) -> np.ndarray:
        out = np.full(len(serving), -np.inf)
        ok = serving >= 0
        if np.any(ok):
            out[ok] = _sinr_from_rx(rx_dbm[ok], serving[ok], self.nodes, self.mask)
        return out

    def measure(self, positions, current=None, hysteresis_db=0.0, shadowing_db=None):
        """(serving index, rx dBm, rsrp dBm, sinr dB) arrays per receiver."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        rx = self.rx_dbm(positions, shadowing_db)
        serving = self.associate(rx, current, hysteresis_db)
        rows = np.arange(len(serving))
        safe = np.where(serving >= 0, serving, 0)
        rx_s = np.where(serving >= 0, rx[rows, safe] if rx.shape[1] else -np.inf, -np.inf)
        rsrp = rx_s - (self.rsrp_offset[safe] if rx.shape[1] else 0.0)
        sinr = self.sinr_db(rx, serving)
        return serving, rx_s, rsrp, sinr


def associate(user_pos, wat: Wat, nodes: Iterable[AccessNode], current_id: int | None = None,
              hysteresis_db: float = 0.0) -> LinkMeasurement:
    wat_nodes = [n for n in nodes if n.wat is wat]
    if not wat_nodes:
        raise ValueError(f"no {wat} node in layout")
    radio = WatRadio(wat, wat_nodes)
    cur = None
    if current_id is not None:
        hits = np.flatnonzero(radio.node_ids == current_id)
        cur = np.array([hits[0] if len(hits) else -1])
    serving, rx, rsrp, sinr = radio.measure(user_pos, cur, hysteresis_db)
    if serving[0] < 0:
        return NO_COVERAGE
    return LinkMeasurement(int(radio.node_ids[serving[0]]), float(rsrp[0]), float(sinr[0]), float(rx[0]))


# ---------------------------------------------------------------- AGV path


def path_length(path) -> float:
    p = np.asarray(path, dtype=float)
    return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def agv_position(t_s: float, path, speed_mps: float, end_behavior: str = "stop") -> np.ndarray:
    """Point reached after travelling ``speed * t`` metres along the polyline."""
    p = np.asarray(path, dtype=float)
    if p.ndim != 2 or len(p) == 0:
        raise ValueError("AGV path is empty")
    if t_s < 0:
        raise ValueError(f"time must be >= 0, got {t_s}")
    if len(p) == 1:
        return p[0].copy()
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    s = speed_mps * t_s
    if end_behavior == "loop" and total > 0:
        s = math.fmod(s, total)
    elif end_behavior != "loop" and end_behavior != "stop":
        raise ValueError(f"unknown end behaviour {end_behavior!r}")
    if s >= total:
        return p[-1].copy()
    i = int(np.searchsorted(cum, s, side="right") - 1)
    i = min(max(i, 0), len(seg) - 1)
    frac = (s - cum[i]) / seg[i] if seg[i] > 0 else 0.0
    return p[i] + frac * (p[i + 1] - p[i])


def points_along(path, spacing_m: float, offset_m: float = 0.0) -> np.ndarray:
    """Equally spaced points (by arc length) along a polyline."""
    p = np.asarray(path, dtype=float)
    total = path_length(p)
    s_values = np.arange(offset_m, total + 1e-9, spacing_m)
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    out = []
    for s in s_values:
        i = min(int(np.searchsorted(cum, s, side="right") - 1), len(seg) - 1)
        frac = (s - cum[i]) / seg[i] if seg[i] > 0 else 0.0
        out.append(p[i] + frac * (p[i + 1] - p[i]))
    return np.array(out)


def all_wats_radio(layout: ScenarioLayout) -> dict[Wat, WatRadio]:
    return {wat: WatRadio(wat, layout.nodes_of(wat)) for wat in WATS}
