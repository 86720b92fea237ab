"""Command-line entry point.

Exit codes: 0 ok, 1 configuration error, 2 runtime error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import engine, metrics
from .config import NAMED_CONFIGS, ConfigError, build_config, config_violations, dump_config
from .traffic import ArrivalConfig, build_library, generate_requests, write_requests_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _say(args, *lines):
    if not args.quiet:
        for line in lines:
            print(line)


def _load(path: str, seed=None):
    try:
        return build_config(path, seed)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, "invalid config " + (exc.source or path) + ":\n  " + "\n  ".join(exc.problems))
    except (FileNotFoundError, KeyError) as exc:
        raise CliError(EXIT_CONFIG, f"cannot load config {path}: {exc}")


def _outdir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {out}: {exc}")
    return out


def write_run(trace: engine.SimTrace, out: Path) -> dict:
    """Trace, summary, plot data and the resolved config for one run."""
    rows = metrics.rows_from_trace(trace)
    agv = trace.config.layout.agv_user_id
    metrics.write_trace(rows, out / "trace.csv")
    report = metrics.summarize(rows, agv, trace.summary) if rows else {"run": trace.summary}
    metrics.write_summary(report, out / "summary.json")
    if rows:
        metrics.export_plot_data(rows, "fig4", out / "fig4.csv", agv)
        metrics.export_plot_data(rows, "weight-timeline", out / "weight-timeline.csv", agv)
    metrics.export_plot_data(None, "popularity", out / "popularity.csv", library=trace.library)
    write_requests_csv(trace.requests, out / "requests.csv")
    dump_config(trace.config.raw, out / "config.resolved.yaml")
    return report


def cmd_run(args) -> int:
    cfg = _load(args.config, args.seed)
    out = _outdir(args.out)
    _say(args, f"config: {args.config}", f"config_hash: {cfg.config_hash}", f"seed: {cfg.seed}")
    try:
        trace = engine.run(cfg)
    except engine.SimulationError as exc:
        raise CliError(EXIT_RUNTIME, f"simulation failed: {exc}")
    try:
        report = write_run(trace, out)
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc))
    _say(args, metrics.summary_text(report), f"wrote {out}")
    return EXIT_OK


def _parse_grid(items) -> dict:
    grid = {}
    for item in items or []:
        if "=" not in item:
            raise CliError(EXIT_CONFIG, f"--grid expects KEY=V1,V2,..., got {item!r}")
        key, values = item.split("=", 1)
        grid[key.strip()] = [yaml.safe_load(v) for v in values.split(",") if v.strip()]
    return grid


def cmd_sweep(args) -> int:
    _load(args.config)  # fail fast on a bad base config
    grid = _parse_grid(args.grid)
    out = _outdir(args.out)
    results = engine.sweep(args.config, grid, threads=args.threads)
    index = []
    failed = 0
    for label, res in results.items():
        entry = {"point": res.point, "seed": res.seed, "dir": label}
        if res.error:
            failed += 1
            entry["error"] = res.error
            _say(args, f"{label}: FAILED {res.error}")
        else:
            try:
                report = write_run(res.trace, _outdir(out / label))
            except OSError as exc:
                raise CliError(EXIT_IO, str(exc))
            entry["spearman"] = report.get("agv_5g_sinr_weight_spearman")
            _say(args, f"{label}: seed {res.seed} -> {out / label}")
        index.append(entry)
    try:
        (out / "sweep.json").write_text(json.dumps(index, indent=2, sort_keys=True, default=str) + "\n")
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc))
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_validate(args) -> int:
    try:
        problems = config_violations(args.config)
    except ConfigError as exc:
        problems = exc.problems
    except (FileNotFoundError, KeyError) as exc:
        raise CliError(EXIT_CONFIG, f"cannot load config {args.config}: {exc}")
    if problems:
        print(f"{args.config}: {len(problems)} problem(s)")
        for p in problems:
            print(f"  {p}")
        return EXIT_CONFIG
    _say(args, f"{args.config}: ok")
    return EXIT_OK


def cmd_summarize(args) -> int:
    target = Path(args.path)
    trace_path = target / "trace.csv" if target.is_dir() else target
    try:
        rows = metrics.read_trace(trace_path)
    except metrics.TraceError as exc:
        raise CliError(EXIT_RUNTIME, str(exc))
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc))
    run_info = None
    prior = trace_path.parent / "summary.json"
    if prior.exists():
        run_info = json.loads(prior.read_text()).get("run")
    try:
        report = metrics.summarize(rows, args.agv_user, run_info)
    except metrics.TraceError as exc:
        raise CliError(EXIT_RUNTIME, str(exc))
    try:
        metrics.write_summary(report, trace_path.parent / "summary.json")
        for kind in args.export or []:
            metrics.export_plot_data(rows, kind, trace_path.parent / f"{kind}.csv", args.agv_user)
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc))
    _say(args, metrics.summary_text(report))
    return EXIT_OK


def cmd_gen_traffic(args) -> int:
    cfg = _load(args.config, args.seed)
    horizon = cfg.duration_s if args.horizon is None else args.horizon
    out = _outdir(args.out)
    try:
        arrival = ArrivalConfig(cfg.arrival.lambda_per_s, horizon, cfg.seed)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc))
    rngs = engine.sub_rngs(cfg.seed)
    library = build_library(cfg.n_files, cfg.zipf_alpha, cfg.size_min_bytes, cfg.size_max_bytes, rngs["sizes"])
    users = [u for u, _ in cfg.layout.static_users] or [cfg.layout.agv_user_id]
    reqs = generate_requests(arrival, library, users, rngs["arrivals"], rngs["files"])
    try:
        path = write_requests_csv(reqs, out / "requests.csv")
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc))
    _say(args, f"seed: {cfg.seed}", f"{len(reqs)} requests over {horizon:g} s -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eatsss", description="Utility-based multi-access traffic steering simulator.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    named = ", ".join(NAMED_CONFIGS)

    def common(sp, out=True, seed=True):
        sp.add_argument("--config", required=True, metavar="PATH", help=f"YAML config or a shipped name ({named})")
        if out:
            sp.add_argument("--out", required=True, metavar="DIR", help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, metavar="N", help="override the config seed")
        sp.add_argument("-q", "--quiet", action="store_true", help="print errors only")

    sp = sub.add_parser("run", help="run one simulation")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run a parameter grid")
    common(sp, seed=False)
    sp.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                    help="dotted config key (or normalized_threshold) and its values; repeatable")
    sp.add_argument("--threads", type=int, default=1, metavar="N", help="parallel runs")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate-config", help="check a config without running it")
    common(sp, out=False, seed=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("summarize", help="summarize a run directory or trace file")
    sp.add_argument("path", help="run directory or trace.csv")
    sp.add_argument("--agv-user", type=int, default=0, metavar="ID")
    sp.add_argument("--export", action="append", choices=("fig4", "weight-timeline"),
                    help="also write plot data next to the trace")
    sp.add_argument("-q", "--quiet", action="store_true")
    sp.set_defaults(func=cmd_summarize)

    sp = sub.add_parser("gen-traffic", help="write a replayable request stream")
    common(sp)
    sp.add_argument("--horizon", type=float, metavar="S", help="stream length (default: config duration)")
    sp.set_defaults(func=cmd_gen_traffic)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - last-resort runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
