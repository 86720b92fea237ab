import math

import numpy as np
import pytest

from eatsss.radio import (
    NO_COVERAGE,
    AccessNode,
    WatRadio,
    agv_position,
    associate,
    path_length,
    pathloss_db,
    points_along,
    rx_power_dbm,
    sinr_db,
)
from eatsss.scenario import LayoutError, layout_from_dict, load_layout
from eatsss.steering import Wat

from conftest import small_layout


def gnb(i, x, y, **params):
    return AccessNode(i, Wat.FIVE_G, (x, y, 3.0), 30.0, 3.5e9, 80e6, params)


def lifi(i, x, y, **params):
    return AccessNode(i, Wat.LIFI, (x, y, 3.5), -20.0, 3.37e14, 20e6, params)


def test_log_distance_pathloss():
    n = gnb(1, 0, 0, exponent=3.0)
    assert pathloss_db(Wat.FIVE_G, n, (0, 0, 2.0)) == pytest.approx(43.3)
    assert pathloss_db(Wat.FIVE_G, n, (10, 0, 3.0)) == pytest.approx(43.3 + 30.0)
    assert pathloss_db(Wat.FIVE_G, n, (10, 0, 3.0), {"exponent": 2.0}) == pytest.approx(63.3)
    with pytest.raises(ValueError):
        pathloss_db(Wat.FIVE_G, n, (0, 0, 3.0))


def test_lambertian_gain_matches_closed_form():
    ap = lifi(1, 0, 0)
    d = 2.0
    m = -math.log(2) / math.log(math.cos(math.radians(60)))
    gain = (m + 1) * 1e-4 / (2 * math.pi * d**2)
    assert pathloss_db(Wat.LIFI, ap, (0, 0, 1.5)) == pytest.approx(-10 * math.log10(gain))
    # 45 degree field of view: just inside vs outside
    assert math.isfinite(pathloss_db(Wat.LIFI, ap, (1.99, 0, 1.5)))
    assert pathloss_db(Wat.LIFI, ap, (2.01, 0, 1.5)) == math.inf
    assert rx_power_dbm(ap, (5, 0, 1.5)) == -math.inf


def test_sinr_interference_and_noise():
    a, b = gnb(1, 0, 0, exponent=3.0), gnb(2, 40, 0, exponent=3.0)
    user = (20, 0, 1.5)
    # symmetric position: equal powers, so SINR is just below 0 dB
    s = sinr_db(user, a, [a, b])
    assert -0.1 < s < 0
    alone = sinr_db(user, a, [a])
    assert alone == pytest.approx(rx_power_dbm(a, user) - a.noise_dbm)
    assert sinr_db(user, a, [a], {"noise_dbm": -50.0}) == pytest.approx(rx_power_dbm(a, user) + 50)


def test_activity_scales_interference():
    a = gnb(1, 0, 0, activity=0.5)
    b = gnb(2, 40, 0, activity=0.5)
    user = (15, 0, 1.5)
    mw = lambda dbm: 10 ** (dbm / 10)
    expected = 10 * math.log10(mw(rx_power_dbm(a, user)) / (0.5 * mw(rx_power_dbm(b, user)) + mw(a.noise_dbm)))
    assert sinr_db(user, a, [a, b]) == pytest.approx(expected, abs=1e-9)


def test_wifi_channels_do_not_interfere():
    mk = lambda i, x, ch: AccessNode(i, Wat.WIFI, (x, 0, 4.0), 20.0, 5e9, 80e6, {"channel": ch})
    a, b = mk(1, 0, 1), mk(2, 30, 2)
    assert sinr_db((10, 0, 1.5), a, [a, b]) == pytest.approx(sinr_db((10, 0, 1.5), a, [a]))


def test_association_ties_and_hysteresis():
    nodes = [gnb(2, 10, 0), gnb(1, -10, 0)]
    m = associate((0, 0, 1.5), Wat.FIVE_G, nodes)
    assert m.node_id == 1  # equal power, lowest id wins
    near2 = (1, 0, 1.5)
    assert associate(near2, Wat.FIVE_G, nodes).node_id == 2
    assert associate(near2, Wat.FIVE_G, nodes, current_id=1, hysteresis_db=3.0).node_id == 1
    assert associate((9, 0, 1.5), Wat.FIVE_G, nodes, current_id=1, hysteresis_db=3.0).node_id == 2


def test_no_lifi_coverage():
    m = associate((10, 10, 1.5), Wat.LIFI, [lifi(1, 0, 0)])
    assert m == NO_COVERAGE and not m.covered


def test_rsrp_is_per_subcarrier():
    n = gnb(1, 0, 0)
    r = WatRadio(Wat.FIVE_G, [n])
    _, rx, rsrp, _ = r.measure([(5, 0, 1.5)])
    assert rx[0] - rsrp[0] == pytest.approx(10 * math.log10(80e6 / 30e3))


def test_agv_motion():
    path = np.array([[0, 0, 1.5], [10, 0, 1.5], [10, 5, 1.5]])
    assert path_length(path) == 15
    assert agv_position(0, path, 1.0) == pytest.approx([0, 0, 1.5])
    assert agv_position(12, path, 1.0) == pytest.approx([10, 2, 1.5])
    assert agv_position(100, path, 1.0) == pytest.approx([10, 5, 1.5])
    assert agv_position(17, path, 1.0, "loop") == pytest.approx([2, 0, 1.5])
    with pytest.raises(ValueError):
        agv_position(1, path, 1.0, "bounce")
    pts = points_along(path[:, :2], 3.0)
    assert len(pts) == 6 and pts[4] == pytest.approx([10, 2])


def test_default_layout():
    lay = load_layout()
    assert lay.violations() == []
    assert len(lay.nodes_of(Wat.FIVE_G)) == 6 and len(lay.nodes_of(Wat.WIFI)) == 5
    assert len(lay.static_users) == 100
    assert lay.path_length_m / lay.agv_speed_mps > 600


def test_layout_errors():
    d = small_layout()
    del d["agv"]
    with pytest.raises(LayoutError):
        layout_from_dict(d)
    d = small_layout()
    d["nodes"].append({"wat": "5G", "id": 1, "position": [500, 5]})
    msgs = "\n".join(layout_from_dict(d).violations())
    assert "duplicate node id" in msgs and "outside factory bounds" in msgs
