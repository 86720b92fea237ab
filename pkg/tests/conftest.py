import pytest

from eatsss.config import build_config
from eatsss.engine import run

ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(pytestconfig):
    """Record one acceptance line (shown in the terminal summary) and assert it."""
    lines = pytestconfig.stash.setdefault(ACCEPTANCE_LINES, [])

    def _report(n: int, name: str, ok: bool, detail: str = "") -> None:
        line = f"[criterion {n}] {'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        lines.append(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)


def small_layout(n_users=6, seed=3):
    return {
        "bounds_m": [0, 0, 40, 20],
        "wat_defaults": {
            "5G": {"tx_power_dbm": 30, "carrier_hz": 3.5e9, "bandwidth_hz": 80e6, "height_m": 3.0,
                   "params": {"exponent": 3.5, "activity": 0.5}},
            "WiFi": {"tx_power_dbm": 20, "carrier_hz": 5e9, "bandwidth_hz": 80e6, "height_m": 4.0},
            "LiFi": {"tx_power_dbm": -20, "carrier_hz": 3.37e14, "bandwidth_hz": 20e6, "height_m": 3.5,
                     "params": {"noise_figure_db": 4}},
        },
        "nodes": [
            {"wat": "5G", "id": 1, "position": [10, 5]},
            {"wat": "5G", "id": 2, "position": [30, 15]},
            {"wat": "WiFi", "id": 1, "position": [20, 10]},
        ],
        "lifi_along_path": {"spacing_m": 3.0},
        "static_users": {"random": {"count": n_users, "seed": seed}} if n_users else {},
        "agv": {"waypoints": [[2, 4], [38, 4], [38, 16]]},
    }


def small_config(**overrides):
    cfg = {"seed": 5, "duration_s": 30, "layout": small_layout(), "traffic": {"lambda_per_s": 1.0}}
    cfg.update(overrides)
    return cfg


@pytest.fixture
def small_raw():
    return small_config()


@pytest.fixture(scope="session")
def small_trace():
    return run(build_config(small_config()))
