"""Utility-based steering decisions for 5G / Wi-Fi / LiFi multi-access users.

Everything in this module is pure: the same telemetry and policy always
produce the same decision, and nothing here touches simulator state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

#: Weight to use for a parameter an operator wants to (almost) ignore.
#: A weight of exactly zero makes the utility denominator vanish.
EPSILON_WEIGHT = 1e-6


class PolicyError(ValueError):
    """Raised for an invalid steering policy (weights, thresholds, maxima)."""


class MissingTelemetryError(LookupError):
    def __init__(self, user_id):
        super().__init__(f"no telemetry for active user {user_id!r}")
        self.user_id = user_id


class Wat(str, enum.Enum):
    """Wireless access technology."""

    FIVE_G = "5G"
    WIFI = "WiFi"
    LIFI = "LiFi"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value) -> "Wat":
        if isinstance(value, Wat):
            return value
        key = str(value).strip().replace("-", "").replace("_", "").lower()
        for wat in cls:
            if key in (wat.value.lower(), wat.name.replace("_", "").lower()):
                return wat
        raise ValueError(f"unknown WAT {value!r}")


WATS: tuple[Wat, ...] = tuple(Wat)


class SteeringMode(str, enum.Enum):
    LOAD_BALANCING = "LB"
    SPLIT_DUPLICATE = "SD"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value) -> "SteeringMode":
        if isinstance(value, SteeringMode):
            return value
        key = str(value).strip().upper().replace("-", "_")
        for mode in cls:
            if key in (mode.value, mode.name):
                return mode
        raise ValueError(f"unknown steering mode {value!r}")


@dataclass(frozen=True, slots=True)
class TelemetrySample:
    """One user's measurement of one access technology at one epoch.

    A sample with ``cell_id < 0`` means the user has no coverage on that
    WAT; its SINR is ``-inf`` so it can never pass the eligibility gate.
    """

    wat: Wat
    cell_id: int
    rsrp_dbm: float
    sinr_db: float
    buffer_pct: float
    delay_ms: float
    timestamp_s: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.buffer_pct <= 100.0:
            raise ValueError(f"buffer_pct {self.buffer_pct} outside [0, 100]")
        if not self.delay_ms >= 0.0:
            raise ValueError(f"delay_ms {self.delay_ms} must be >= 0")
        if not self.timestamp_s >= 0.0:
            raise ValueError(f"timestamp_s {self.timestamp_s} must be >= 0")
        if math.isnan(self.sinr_db) or self.sinr_db == math.inf:
            raise ValueError(f"sinr_db {self.sinr_db} is not a valid measurement")

    @property
    def covered(self) -> bool:
        return self.cell_id >= 0


@dataclass(frozen=True, slots=True)
class ParamWeights:
    w_sinr: float
    w_buffer: float
    w_delay: float

    def violations(self, prefix: str = "weights") -> list[str]:
        out = []
        for name in ("w_sinr", "w_buffer", "w_delay"):
            v = getattr(self, name)
            if not math.isfinite(v):
                out.append(f"{prefix}.{name}: must be finite, got {v}")
            elif v < 0:
                out.append(f"{prefix}.{name}: must be non-negative, got {v}")
            elif v == 0:
                out.append(
                    f"{prefix}.{name}: zero weight makes the utility undefined; "
                    f"use a small epsilon such as {EPSILON_WEIGHT:g}"
                )
        return out


@dataclass(frozen=True, slots=True)
class ParamThresholds:
    """Eligibility gate: SINR lower bound, buffer and delay upper bounds.

    ``t_buffer_pct = inf`` disables the buffer gate (a full buffer still
    passes); any finite value must lie in [0, 100].
    """

    t_sinr_db: float
    t_buffer_pct: float
    t_delay_ms: float

    def violations(self, prefix: str = "thresholds") -> list[str]:
        out = []
        if math.isnan(self.t_sinr_db):
            out.append(f"{prefix}.t_sinr_db: must be a number")
        b = self.t_buffer_pct
        if math.isnan(b) or (b != math.inf and not 0.0 <= b <= 100.0):
            out.append(f"{prefix}.t_buffer_pct: must lie in [0, 100] or be inf, got {b}")
        if math.isnan(self.t_delay_ms) or not self.t_delay_ms > 0:
            out.append(f"{prefix}.t_delay_ms: must be > 0, got {self.t_delay_ms}")
        return out


@dataclass(frozen=True, slots=True)
class NormalizationMaxima:
    x_max_sinr_db: float = 40.0
    x_max_buffer_pct: float = 100.0
    x_max_delay_ms: float = 100.0

    def violations(self, prefix: str = "maxima") -> list[str]:
        out = []
        for name in ("x_max_sinr_db", "x_max_buffer_pct", "x_max_delay_ms"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                out.append(f"{prefix}.{name}: must be finite and > 0, got {v}")
        return out


@dataclass(frozen=True)
class SteeringPolicy:
    """Operator configuration for one traffic class.

    ``maxima`` applies to every WAT unless ``maxima_per_wat`` overrides it
    for a given technology.  ``score_threshold``, when set, additionally
    drops an eligible WAT whose overall utility falls below it (composite
    gating); the default gates on per-parameter thresholds only.
    """

    mode: SteeringMode
    weights: ParamWeights
    thresholds: Mapping[Wat, ParamThresholds]
    maxima: NormalizationMaxima = field(default_factory=NormalizationMaxima)
    maxima_per_wat: Mapping[Wat, NormalizationMaxima] | None = None
    score_threshold: float | None = None

    @classmethod
    def from_normalized_threshold(
        cls,
        mode: SteeringMode,
        weights: ParamWeights,
        q: float,
        maxima: NormalizationMaxima | None = None,
        maxima_per_wat: Mapping[Wat, NormalizationMaxima] | None = None,
    ) -> "SteeringPolicy":
        """Expand a single normalized threshold ``q`` into raw per-WAT gates.

        SINR must exceed ``q * x_max_sinr``; buffer and delay must stay
        below ``q * x_max_buffer`` and ``q * x_max_delay``.
        """
        maxima = maxima or NormalizationMaxima()
        thresholds = {}
        for wat in WATS:
            m = (maxima_per_wat or {}).get(wat, maxima)
            thresholds[wat] = ParamThresholds(
                t_sinr_db=q * m.x_max_sinr_db,
                t_buffer_pct=q * m.x_max_buffer_pct,
                t_delay_ms=q * m.x_max_delay_ms,
            )
        return cls(mode, weights, thresholds, maxima, maxima_per_wat)

    def maxima_for(self, wat: Wat) -> NormalizationMaxima:
        if self.maxima_per_wat and wat in self.maxima_per_wat:
            return self.maxima_per_wat[wat]
        return self.maxima

    def violations(self, prefix: str = "policy") -> list[str]:
        out = self.weights.violations(f"{prefix}.weights")
        missing = [str(w) for w in WATS if w not in self.thresholds]
        if missing:
            out.append(f"{prefix}.thresholds: missing WAT(s) {', '.join(missing)}")
        for wat, th in self.thresholds.items():
            out.extend(th.violations(f"{prefix}.thresholds.{wat}"))
        out.extend(self.maxima.violations(f"{prefix}.maxima"))
        for wat, m in (self.maxima_per_wat or {}).items():
            out.extend(m.violations(f"{prefix}.maxima_per_wat.{wat}"))
        if self.score_threshold is not None and not math.isfinite(self.score_threshold):
            out.append(f"{prefix}.score_threshold: must be finite")
        return out

    def validate(self) -> "SteeringPolicy":
        problems = self.violations()
        if problems:
            raise PolicyError("; ".join(problems))
        return self


@dataclass(frozen=True, slots=True)
class UtilityBreakdown:
    u_sinr: float = 0.0
    u_buffer: float = 0.0
    u_delay: float = 0.0
    overall: float = 0.0
    eligible: bool = False


INELIGIBLE = UtilityBreakdown()


@dataclass(frozen=True, slots=True)
class SteeringDecision:
    user_id: int
    mode: SteeringMode
    breakdowns: Mapping[Wat, UtilityBreakdown]
    lb_weights: Mapping[Wat, float] | None = None
    sd_selection: Mapping[Wat, bool] | None = None

    @property
    def degenerate(self) -> bool:
        """True when the decision steers nothing anywhere."""
        if self.mode is SteeringMode.LOAD_BALANCING:
            return not any(v > 0 for v in self.lb_weights.values())
        return not any(self.sd_selection.values())


def param_utility(x: float, w: float, x_max: float) -> float:
    """Logarithmic utility of one telemetry value, scaled to [0, 1].

    >>> param_utility(40.0, 1.0, 40.0)
    1.0
    """
    if not math.isfinite(x):
        raise ValueError(f"telemetry value must be finite, got {x}")
    if not (math.isfinite(w) and w >= 0):
        raise ValueError(f"weight must be finite and non-negative, got {w}")
    if w == 0:
        raise PolicyError(
            f"zero weight gives log(1)/log(1); use a small epsilon such as {EPSILON_WEIGHT:g}"
        )
    if not (math.isfinite(x_max) and x_max > 0):
        raise ValueError(f"x_max must be finite and > 0, got {x_max}")
    if x <= 0:
        return 0.0
    if x >= x_max:
        return 1.0
    return math.log1p(w * x) / math.log1p(w * x_max)


def normalize_sample(s: TelemetrySample, maxima: NormalizationMaxima) -> tuple[float, float, float]:
    # delay is capped at its normalization maximum; the other two pass through
    return s.sinr_db, s.buffer_pct, min(s.delay_ms, maxima.x_max_delay_ms)


def eligibility(s: TelemetrySample, th: ParamThresholds) -> bool:
    return s.sinr_db > th.t_sinr_db and s.buffer_pct < th.t_buffer_pct and s.delay_ms < th.t_delay_ms


def utility_breakdown(s: TelemetrySample, policy: SteeringPolicy) -> UtilityBreakdown:
    if not eligibility(s, policy.thresholds[s.wat]):
        return INELIGIBLE
    m = policy.maxima_for(s.wat)
    x_sinr, x_buf, x_delay = normalize_sample(s, m)
    w = policy.weights
    u_sinr = param_utility(x_sinr, w.w_sinr, m.x_max_sinr_db)
    u_buf = param_utility(x_buf, w.w_buffer, m.x_max_buffer_pct)
    u_delay = param_utility(x_delay, w.w_delay, m.x_max_delay_ms)
    overall = u_sinr - u_buf - u_delay
    if policy.score_threshold is not None and overall < policy.score_threshold:
        return INELIGIBLE
    return UtilityBreakdown(u_sinr, u_buf, u_delay, overall, True)


def decide_lb(breakdowns: Mapping[Wat, UtilityBreakdown]) -> dict[Wat, float]:
    """Percentage weights proportional to the (non-negative) overall utility.

    Negative utilities count as zero.  If nothing is positive every weight
    is zero and the resulting decision is degenerate.
    """
    clamped = {wat: max(breakdowns[wat].overall, 0.0) for wat in WATS}
    total = sum(clamped.values())
    if total <= 0:
        return {wat: 0.0 for wat in WATS}
    return {wat: clamped[wat] / total * 100.0 for wat in WATS}


def decide_sd(breakdowns: Mapping[Wat, UtilityBreakdown]) -> dict[Wat, bool]:
    return {wat: breakdowns[wat].overall > 0 for wat in WATS}


def decide_user(
    samples: Mapping[Wat, TelemetrySample], policy: SteeringPolicy, user_id: int
) -> SteeringDecision:
    breakdowns = {wat: utility_breakdown(samples[wat], policy) for wat in WATS}
    if policy.mode is SteeringMode.LOAD_BALANCING:
        return SteeringDecision(user_id, policy.mode, breakdowns, lb_weights=decide_lb(breakdowns))
    return SteeringDecision(user_id, policy.mode, breakdowns, sd_selection=decide_sd(breakdowns))


def decide_all(
    active_users: Iterable[int],
    telemetry: Mapping[int, Mapping[Wat, TelemetrySample]],
    policy_per_user: Mapping[int, SteeringPolicy],
) -> list[SteeringDecision]:
    decisions = []
    for user in active_users:
        if user not in telemetry:
            raise MissingTelemetryError(user)
        decisions.append(decide_user(telemetry[user], policy_per_user[user], user))
    return decisions


def round_weights(weights: Mapping[Wat, float], total: int = 100) -> dict[Wat, int]:
    """Integer weights summing exactly to ``total`` (largest remainder).

    All-zero input stays all zero.  Remainder ties go to the earlier WAT.
    """
    values = [weights[w] for w in WATS]
    s = sum(values)
    if s <= 0:
        return {w: 0 for w in WATS}
    scaled = [v / s * total for v in values]
    floors = [math.floor(v) for v in scaled]
    short = total - sum(floors)
    order: Sequence[int] = sorted(range(len(WATS)), key=lambda i: (-(scaled[i] - floors[i]), i))
    for i in order[:short]:
        floors[i] += 1
    return dict(zip(WATS, floors))
