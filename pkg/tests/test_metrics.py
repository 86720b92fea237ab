import json

import numpy as np
import pytest

from eatsss.metrics import (
    TRACE_COLUMNS,
    TraceError,
    export_plot_data,
    rank_correlation,
    read_trace,
    recompute_mismatches,
    rows_from_trace,
    summarize,
    summary_text,
    write_trace,
)
from eatsss.steering import WATS
from eatsss.traffic import TrafficType


def test_empty_trace_is_header_only(tmp_path):
    path = write_trace([], tmp_path / "t.csv")
    assert path.read_text() == ",".join(TRACE_COLUMNS) + "\n"
    assert read_trace(path) == []
    with pytest.raises(TraceError):
        summarize([])


def test_round_trip_is_exact(small_trace, tmp_path):
    rows = rows_from_trace(small_trace)
    p1 = write_trace(rows, tmp_path / "a.csv")
    back = read_trace(p1)
    assert back == rows
    p2 = write_trace(back, tmp_path / "b.csv")
    assert p1.read_bytes() == p2.read_bytes()


def test_one_row_per_epoch_user_wat(small_trace):
    rows = rows_from_trace(small_trace)
    keys = [(r.timestamp_s, r.user_id, r.wat) for r in rows]
    assert len(keys) == len(set(keys)) == 30 * 7 * 3


def test_offline_recompute_matches(small_trace):
    cfg = small_trace.config
    rows = rows_from_trace(small_trace)
    assert recompute_mismatches(rows, lambda u: cfg.policies[TrafficType.EMBB]) == []
    tampered = list(rows)
    i = next(k for k, r in enumerate(rows) if r.lb_weight_pct and r.lb_weight_pct > 0)
    r = rows[i]
    tampered[i] = type(r)(*[getattr(r, f) for f in r.__slots__[:9]], r.lb_weight_pct + 1, r.sd_selected, r.degenerate_flag)
    assert len(recompute_mismatches(tampered, lambda u: cfg.policies[TrafficType.EMBB])) == 1


def test_rank_correlation():
    assert rank_correlation([1, 2, 3, 4], [10, 20, 25, 90]) == pytest.approx(1.0)
    assert rank_correlation([3, 3, 3], [1, 2, 3]) is None
    assert rank_correlation([1], [2]) is None


def test_summary_is_pure(small_trace):
    rows = rows_from_trace(small_trace)
    a = summarize(rows, run_info=small_trace.summary)
    b = summarize(list(rows), run_info=small_trace.summary)
    assert a == b
    for wat in WATS:
        s = a["agv_per_wat"][wat.value]["sinr_db"]
        if s["p50"] is not None:
            assert s["p5"] <= s["p50"] <= s["p95"]
    assert "run.bytes.injected" in summary_text(a)
    json.dumps(a)


def test_plot_exports(small_trace, tmp_path):
    rows = rows_from_trace(small_trace)
    fig4 = export_plot_data(rows, "fig4", tmp_path / "f.csv").read_text().splitlines()
    assert fig4[0] == "t,sinr_db,weight_pct,utility" and len(fig4) == 31
    tl = export_plot_data(rows, "weight-timeline", tmp_path / "w.csv").read_text().splitlines()
    assert tl[0] == "t,5G,WiFi,LiFi"
    pop = export_plot_data(None, "popularity", tmp_path / "p.csv", library=small_trace.library).read_text().splitlines()
    assert pop[0] == "file_id,P_F,size_bytes" and len(pop) == small_trace.library.n_files + 1
    with pytest.raises(ValueError):
        export_plot_data(rows, "fig5", tmp_path / "x.csv")


def test_sd_timeline_is_zero_or_hundred(tmp_path, small_raw):
    from eatsss.config import build_config
    from eatsss.engine import run

    tr = run(build_config(dict(small_raw, duration_s=10, agv={"traffic_type": "URLLC"})))
    lines = export_plot_data(rows_from_trace(tr), "weight-timeline", tmp_path / "w.csv").read_text().splitlines()[1:]
    values = {v for line in lines for v in line.split(",")[1:]}
    assert values <= {"0", "100"}


def test_bad_trace_file(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(TraceError):
        read_trace(p)
    with pytest.raises(OSError, match="nope.csv"):
        read_trace(tmp_path / "nope.csv")
