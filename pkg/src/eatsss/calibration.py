"""Reference telemetry snapshots and the search that fits normalization maxima to them.

Three AGV snapshots were published with, for each steering mode, the
telemetry of every WAT and the resulting decision.  The buffer and delay
readings differ between the two modes because they come from separate runs.
Delays shown as ">100" are stored as 100 ms, the reporting cap.

The threshold and maxima set behind those decisions was never given, so the
shipped ``table1`` config holds values found by :func:`calibrate_lb` (LB) and
picked by hand for SD.  One shared set of maxima cannot reproduce the 50/50
split of snapshot 2 (5G is worse than LiFi on both SINR and buffer there, so
it always gets the smaller share); the LB fit therefore uses per-WAT maxima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .steering import (
    WATS,
    SteeringDecision,
    SteeringPolicy,
    TelemetrySample,
    Wat,
    decide_user,
    param_utility,
)

# (cell id, rsrp dBm, sinr dB, buffer %, delay ms) per WAT in 5G, WiFi, LiFi order
TABLE1 = {
    1: {
        "LB": [(1, -77, 29, 8, 14), (1, -101, 9, 27, 6), (4, -100, 9, 8, 2)],
        "SD": [(1, -77, 29, 17, 18), (1, -101, 9, 64, 9), (4, -100, 9, 8, 2)],
    },
    2: {
        "LB": [(3, -102, 4, 9, 100), (2, -99, 10, 51, 3), (15, -102, 5, 7, 100)],
        "SD": [(3, -102, 4, 14, 89), (2, -99, 10, 65, 10), (15, -102, 5, 8, 100)],
    },
    3: {
        "LB": [(6, -90, 16, 10, 41), (4, -79, 30, 68, 3), (37, -100, 10, 10, 3)],
        "SD": [(6, -90, 16, 21, 26), (4, -79, 30, 100, 4), (37, -100, 10, 7, 2)],
    },
}

# published outcomes: LB weights in percent, SD selections
PUBLISHED = {
    1: {"LB": (49, 22, 29), "SD": (True, True, True)},
    2: {"LB": (50, 0, 50), "SD": (False, True, False)},
    3: {"LB": (23, 48, 28), "SD": (False, True, True)},
}

STRETCH_TOLERANCE_PCT = 10.0


def snapshot(instance: int, mode: str) -> dict[Wat, TelemetrySample]:
    rows = TABLE1[instance][mode]
    return {
        wat: TelemetrySample(wat, cell, float(rsrp), float(sinr), float(buf), float(delay))
        for wat, (cell, rsrp, sinr, buf, delay) in zip(WATS, rows)
    }


def decide_snapshot(instance: int, policy: SteeringPolicy) -> SteeringDecision:
    return decide_user(snapshot(instance, policy.mode.value), policy, user_id=0)


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def ordering_checks(lb: SteeringPolicy, sd: SteeringPolicy) -> list[CheckResult]:
    """The hard qualitative outcomes of the three snapshots."""
    g, wf, lf = WATS
    w = {k: decide_snapshot(k, lb).lb_weights for k in (1, 2, 3)}
    s = {k: decide_snapshot(k, sd).sd_selection for k in (1, 2, 3)}

    def show(d):
        return ", ".join(f"{wat}={v:.2f}" if isinstance(v, float) else f"{wat}={v}" for wat, v in d.items())

    out = [
        CheckResult("instance 1 LB: 5G > LiFi > WiFi > 0",
                    w[1][g] > w[1][lf] > w[1][wf] > 0, show(w[1])),
        CheckResult("instance 2 LB: WiFi = 0, 5G/LiFi = 50/50 +- 2",
                    w[2][wf] == 0 and abs(w[2][g] - 50) <= 2 and abs(w[2][lf] - 50) <= 2, show(w[2])),
        CheckResult("instance 3 LB: WiFi largest",
                    w[3][wf] > max(w[3][g], w[3][lf]), show(w[3])),
        CheckResult("instance 1 SD: all selected", all(s[1].values()), show(s[1])),
        CheckResult("instance 2 SD: WiFi only", [s[2][x] for x in WATS] == [False, True, False], show(s[2])),
        CheckResult("instance 3 SD: WiFi and LiFi only", [s[3][x] for x in WATS] == [False, True, True], show(s[3])),
    ]
    return out


def stretch_checks(lb: SteeringPolicy, tol: float = STRETCH_TOLERANCE_PCT) -> list[CheckResult]:
    """Published LB weight triples of snapshots 1 and 3 within ``tol`` points."""
    out = []
    for k in (1, 3):
        got = decide_snapshot(k, lb).lb_weights
        err = max(abs(got[wat] - ref) for wat, ref in zip(WATS, PUBLISHED[k]["LB"]))
        out.append(CheckResult(f"instance {k} LB within {tol:g} pts of {PUBLISHED[k]['LB']}", err <= tol,
                               f"max error {err:.2f}"))
    return out


# ------------------------------------------------------------------- search


def _utilities(x: np.ndarray, instance: int, weights) -> list[float]:
    out = []
    for j, (_, _, sinr, buf, delay) in enumerate(TABLE1[instance]["LB"]):
        m_s, m_b, m_d = np.exp(x[3 * j:3 * j + 3])
        out.append(
            param_utility(sinr, weights.w_sinr, m_s)
            - param_utility(buf, weights.w_buffer, m_b)
            - param_utility(min(delay, m_d), weights.w_delay, m_d)
        )
    return out


def _lb_weights(us):
    c = [max(u, 0.0) for u in us]
    tot = sum(c)
    return [100 * v / tot if tot > 0 else 0.0 for v in c]


def calibration_loss(x: np.ndarray, weights, margin: float = 0.02) -> float:
    """Penalty for violated hard outcomes plus distance to the published triples.

    ``margin`` keeps the utilities of snapshot 2 away from zero so rounding
    the fitted maxima cannot flip a sign.
    """
    u = {k: _utilities(x, k, weights) for k in (1, 2, 3)}
    w = {k: _lb_weights(u[k]) for k in (1, 2, 3)}
    pen = 0.0
    a = w[1]
    pen += max(0, a[2] - a[0] + 1) + max(0, a[1] - a[2] + 1) + max(0, 1 - a[1])
    b = w[2]
    pen += b[1] + max(0, abs(b[0] - 50) - 1.0) + max(0, abs(b[2] - 50) - 1.0)
    c = w[3]
    pen += max(0, max(c[0], c[2]) - c[1] + 1)
    # utility units; 100x puts 0.01 of utility on par with one weight point
    pen += 100 * (max(0, margin - u[2][0]) + max(0, margin - u[2][2]) + max(0, u[2][1] + margin))
    stretch = sum(max(0, abs(p - q) - (STRETCH_TOLERANCE_PCT - 1))
                  for k in (1, 3) for p, q in zip(w[k], PUBLISHED[k]["LB"]))
    fit = sum((p - q) ** 2 for k in (1, 3) for p, q in zip(w[k], PUBLISHED[k]["LB"]))
    return 1e3 * pen + 100 * stretch + 0.01 * fit


def calibrate_lb(weights, seeds=range(6), margin: float = 0.02, bounds=(0.3, 1e6),
                 maxiter: int = 800, popsize: int = 25) -> dict[Wat, tuple[float, float, float]]:
    """Differential-evolution search for per-WAT (sinr, buffer, delay) maxima.

    The search runs in log space; the best result over ``seeds`` is returned.
    """
    from scipy.optimize import differential_evolution

    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    best = None
    for seed in seeds:
        r = differential_evolution(calibration_loss, [(lo, hi)] * 9, args=(weights, margin),
                                   seed=seed, maxiter=maxiter, popsize=popsize, tol=1e-12)
        if best is None or r.fun < best.fun:
            best = r
    m = np.exp(best.x)
    return {wat: tuple(float(v) for v in m[3 * j:3 * j + 3]) for j, wat in enumerate(WATS)}
