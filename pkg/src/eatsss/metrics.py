"""Trace CSV serialization, run summaries, plot-ready exports and offline re-checks.

Trace format: one row per (epoch, user, WAT), header mandatory.  Every real
is written with 6 significant digits (``%.6g``); ``timestamp_s`` uses the
shortest exact repr.  ``-inf`` marks a WAT with no coverage.  Empty fields:
``utility_overall`` when the WAT is ineligible, ``lb_weight_pct`` in SD rows,
``sd_selected`` in LB rows.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .steering import (
    WATS,
    SteeringMode,
    SteeringPolicy,
    TelemetrySample,
    Wat,
    decide_user,
)

TRACE_COLUMNS = (
    "timestamp_s",
    "user_id",
    "wat",
    "cell_id",
    "rsrp_dbm",
    "sinr_db",
    "buffer_pct",
    "delay_ms",
    "utility_overall",
    "lb_weight_pct",
    "sd_selected",
    "degenerate_flag",
)

PLOT_KINDS = ("fig4", "weight-timeline", "popularity")


class TraceError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class TraceRow:
    timestamp_s: float
    user_id: int
    wat: Wat
    cell_id: int
    rsrp_dbm: float
    sinr_db: float
    buffer_pct: float
    delay_ms: float
    utility_overall: float | None
    lb_weight_pct: float | None
    sd_selected: bool | None
    degenerate_flag: bool

    @property
    def mode(self) -> SteeringMode:
        return SteeringMode.LOAD_BALANCING if self.sd_selected is None else SteeringMode.SPLIT_DUPLICATE

    @property
    def steered_pct(self) -> float:
        """LB weight, or 0/100 for an SD selection."""
        if self.sd_selected is None:
            return self.lb_weight_pct
        return 100.0 if self.sd_selected else 0.0

    def sample(self) -> TelemetrySample:
        return TelemetrySample(self.wat, self.cell_id, self.rsrp_dbm, self.sinr_db,
                               self.buffer_pct, self.delay_ms, self.timestamp_s)


def fmt(x: float | None) -> str:
    if x is None:
        return ""
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def q6(x: float) -> float:
    return float(fmt(x)) if math.isfinite(x) else x


def rows_from_trace(trace) -> list[TraceRow]:
    """Flatten a :class:`~eatsss.engine.SimTrace` into trace rows (user order, then WAT)."""
    out = []
    for rec in trace.records:
        for user, samples in rec.telemetry.items():
            d = rec.decisions[user]
            degenerate = d.degenerate
            for wat in WATS:
                s = samples[wat]
                b = d.breakdowns[wat]
                out.append(TraceRow(
                    rec.timestamp_s, user, wat, s.cell_id, s.rsrp_dbm, s.sinr_db, s.buffer_pct, s.delay_ms,
                    q6(b.overall) if b.eligible else None,
                    q6(d.lb_weights[wat]) if d.lb_weights is not None else None,
                    bool(d.sd_selection[wat]) if d.sd_selection is not None else None,
                    degenerate,
                ))
    return out


def _row_fields(r: TraceRow) -> list[str]:
    return [
        repr(r.timestamp_s), str(r.user_id), r.wat.value, str(r.cell_id),
        fmt(r.rsrp_dbm), fmt(r.sinr_db), fmt(r.buffer_pct), fmt(r.delay_ms),
        fmt(r.utility_overall), fmt(r.lb_weight_pct),
        "" if r.sd_selected is None else str(int(r.sd_selected)),
        str(int(r.degenerate_flag)),
    ]


def write_trace(trace_or_rows, path) -> Path:
    rows = trace_or_rows if isinstance(trace_or_rows, (list, tuple)) else rows_from_trace(trace_or_rows)
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            w.writerows(_row_fields(r) for r in rows)
    except OSError as exc:
        raise OSError(f"cannot write trace {path}: {exc.strerror or exc}") from exc
    return path


def _opt(s: str, conv):
    return None if s == "" else conv(s)


def read_trace(path) -> list[TraceRow]:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise OSError(f"cannot read trace {path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise TraceError(f"{path}: not a trace file (bad header)")
        rows = []
        for n, f in enumerate(reader, start=2):
            try:
                rows.append(TraceRow(
                    float(f[0]), int(f[1]), Wat.parse(f[2]), int(f[3]),
                    float(f[4]), float(f[5]), float(f[6]), float(f[7]),
                    _opt(f[8], float), _opt(f[9], float), _opt(f[10], lambda s: s == "1"),
                    f[11] == "1",
                ))
            except (ValueError, IndexError) as exc:
                raise TraceError(f"{path}:{n}: {exc}") from exc
    return rows


# ----------------------------------------------------------------- summary


def _pct(values: np.ndarray) -> dict[str, float | None]:
    if len(values) == 0:
        return {"mean": None, "p5": None, "p50": None, "p95": None}
    p5, p50, p95 = np.percentile(values, [5, 50, 95])
    return {"mean": float(values.mean()), "p5": float(p5), "p50": float(p50), "p95": float(p95)}


def rank_correlation(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman correlation, or None when either series is constant or too short."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        return None
    return float(stats.spearmanr(x, y).statistic)


def agv_series(rows: Iterable[TraceRow], agv_user_id: int = 0) -> dict[Wat, list[TraceRow]]:
    out: dict[Wat, list[TraceRow]] = {w: [] for w in WATS}
    for r in rows:
        if r.user_id == agv_user_id:
            out[r.wat].append(r)
    return out


def summarize(rows: Sequence[TraceRow], agv_user_id: int = 0, run_info: Mapping[str, Any] | None = None) -> dict:
    """Summary statistics of a trace; ``run_info`` (engine metadata) is attached verbatim."""
    if not rows:
        raise TraceError("cannot summarize an empty trace")
    agv = agv_series(rows, agv_user_id)
    if not agv[Wat.FIVE_G]:
        raise TraceError(f"trace has no rows for AGV user {agv_user_id}")
    report: dict[str, Any] = {"agv_user_id": agv_user_id, "epochs": len(agv[Wat.FIVE_G])}
    report["mode"] = agv[Wat.FIVE_G][0].mode.value

    per_wat = {}
    for wat in WATS:
        series = agv[wat]
        sinr = np.array([r.sinr_db for r in series if math.isfinite(r.sinr_db)])
        n = len(series)
        per_wat[wat.value] = {
            "sinr_db": _pct(sinr),
            "coverage_fraction": len(sinr) / n,
            "eligible_fraction": sum(r.utility_overall is not None for r in series) / n,
            "steered_fraction": sum(r.steered_pct > 0 for r in series) / n,
            "mean_steered_pct": float(np.mean([r.steered_pct for r in series])),
        }
    report["agv_per_wat"] = per_wat

    g = [r for r in agv[Wat.FIVE_G] if math.isfinite(r.sinr_db)]
    rho = rank_correlation([r.sinr_db for r in g], [r.steered_pct for r in g])
    report["agv_5g_sinr_weight_spearman"] = rho
    report["agv_5g_good_sinr_zero_weight_epochs"] = sum(1 for r in g if r.sinr_db > 0 and r.steered_pct == 0)

    epochs = {}
    for r in rows:
        epochs.setdefault((r.timestamp_s, r.user_id), r.degenerate_flag)
    report["degenerate_decisions"] = sum(epochs.values())
    report["decisions"] = len(epochs)
    if run_info:
        report["run"] = dict(run_info)
    return report


def summary_text(report: Mapping[str, Any], prefix: str = "") -> str:
    """Flatten a summary into ``key: value`` lines."""
    lines = []
    for k, v in report.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            lines.append(summary_text(v, key + "."))
        else:
            lines.append(f"{key}: {v}")
    return "\n".join(x for x in lines if x)


def write_summary(report: Mapping[str, Any], path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ------------------------------------------------------------ plot exports


def export_plot_data(rows: Sequence[TraceRow] | None, which: str, path, agv_user_id: int = 0,
                     library=None) -> Path:
    """Write plot-ready columns; nothing is rendered."""
    if which not in PLOT_KINDS:
        raise ValueError(f"unknown plot selector {which!r}; choose from {', '.join(PLOT_KINDS)}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if which == "popularity":
        if library is None:
            raise ValueError("popularity export needs the content library")
        w.writerow(("file_id", "P_F", "size_bytes"))
        for f, (p, s) in enumerate(zip(library.popularity, library.sizes_bytes), start=1):
            w.writerow((f, fmt(float(p)), int(s)))
    else:
        agv = agv_series(rows or [], agv_user_id)
        if which == "fig4":
            w.writerow(("t", "sinr_db", "weight_pct", "utility"))
            for r in agv[Wat.FIVE_G]:
                w.writerow((repr(r.timestamp_s), fmt(r.sinr_db), fmt(r.steered_pct), fmt(r.utility_overall)))
        else:
            w.writerow(("t",) + tuple(wat.value for wat in WATS))
            for rs in zip(*(agv[wat] for wat in WATS)):
                w.writerow((repr(rs[0].timestamp_s),) + tuple(fmt(r.steered_pct) for r in rs))
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


# ------------------------------------------------------ offline consistency


def recompute_mismatches(rows: Sequence[TraceRow], policy_for_user) -> list[str]:
    """Re-run steering on each (epoch, user) of the trace and list any disagreement.

    ``policy_for_user`` maps a user id to its :class:`SteeringPolicy` (a
    callable or a mapping).  Decisions are compared in the written format.
    """
    lookup = policy_for_user if callable(policy_for_user) else policy_for_user.__getitem__
    groups: dict[tuple[float, int], dict[Wat, TraceRow]] = {}
    for r in rows:
        groups.setdefault((r.timestamp_s, r.user_id), {})[r.wat] = r
    bad = []
    for (t, user), by_wat in groups.items():
        if set(by_wat) != set(WATS):
            bad.append(f"t={t} user={user}: incomplete WAT rows")
            continue
        policy: SteeringPolicy = lookup(user)
        d = decide_user({w: by_wat[w].sample() for w in WATS}, policy, user)
        for wat in WATS:
            r = by_wat[wat]
            b = d.breakdowns[wat]
            exp_u = fmt(b.overall) if b.eligible else ""
            exp_w = fmt(d.lb_weights[wat]) if d.lb_weights is not None else ""
            exp_s = "" if d.sd_selection is None else str(int(d.sd_selection[wat]))
            got = _row_fields(r)
            if (got[8], got[9], got[10]) != (exp_u, exp_w, exp_s) or r.degenerate_flag != d.degenerate:
                bad.append(f"t={t} user={user} {wat}: recorded {got[8:]} recomputed {[exp_u, exp_w, exp_s, int(d.degenerate)]}")
    return bad


def rows_as_dicts(rows: Iterable[TraceRow]) -> list[dict]:
    return [asdict(r) for r in rows]
