import numpy as np
import pytest

from eatsss.calibration import (
    calibrate_lb,
    calibration_loss,
    decide_snapshot,
    ordering_checks,
    snapshot,
    stretch_checks,
)
from eatsss.config import build_config
from eatsss.steering import WATS, NormalizationMaxima, ParamThresholds, ParamWeights, SteeringMode, SteeringPolicy
from eatsss.traffic import TrafficType

G, W, L = WATS


@pytest.fixture(scope="module")
def table1():
    cfg = build_config("table1")
    return cfg.policies[TrafficType.EMBB], cfg.policies[TrafficType.URLLC]


def test_snapshots_expressible():
    s = snapshot(2, "SD")
    assert [s[w].delay_ms for w in WATS] == [89, 10, 100]
    assert [s[w].cell_id for w in WATS] == [3, 2, 15]


def test_orderings_hold(table1):
    for check in ordering_checks(*table1):
        assert check.ok, f"{check.name}: {check.detail}"


def test_stretch_targets(table1):
    for check in stretch_checks(table1[0]):
        assert check.ok, f"{check.name}: {check.detail}"


def test_shared_maxima_cannot_split_snapshot_two_evenly():
    # 5G is worse than LiFi on SINR (4 < 5) and buffer (9 > 7) with equal capped delays,
    # so any shared maxima give 5G the smaller share
    w = ParamWeights(1, 0.7, 0.2)
    rng = np.random.default_rng(0)
    for _ in range(2000):
        m = NormalizationMaxima(*np.exp(rng.uniform(np.log(0.3), np.log(1e6), 3)))
        th = {x: ParamThresholds(-1, 1e9, 1e9) for x in WATS}
        d = decide_snapshot(2, SteeringPolicy(SteeringMode.LOAD_BALANCING, w, th, m))
        assert d.lb_weights[G] <= d.lb_weights[L]


def test_stored_maxima_have_low_loss(table1):
    lb = table1[0]
    x = np.log([v for wat in WATS for v in (lb.maxima_for(wat).x_max_sinr_db, lb.maxima_for(wat).x_max_buffer_pct,
                                           lb.maxima_for(wat).x_max_delay_ms)])
    # hard outcomes and stretch targets met; every snapshot-2 utility stays clear of zero
    assert calibration_loss(x, lb.weights, margin=0.0) < 100
    assert calibration_loss(x, lb.weights, margin=0.005) < 100


def test_search_finds_feasible_set(table1):
    lb, sd = table1
    found = calibrate_lb(lb.weights, seeds=[0], maxiter=150, popsize=15)
    x = np.log([v for wat in WATS for v in found[wat]])
    assert calibration_loss(x, lb.weights, margin=0.0) < 1000
    fitted = SteeringPolicy(lb.mode, lb.weights, lb.thresholds, lb.maxima,
                            {wat: NormalizationMaxima(*found[wat]) for wat in WATS})
    lb_checks = [c for c in ordering_checks(fitted, sd) if " LB" in c.name]
    assert all(c.ok for c in lb_checks), [c.detail for c in lb_checks if not c.ok]
