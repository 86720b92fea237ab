"""Run paper-lb and show how the AGV's 5G share tracks its 5G SINR.

    python3 demos/lb_run.py [OUT_DIR]

Writes the same files as ``eatsss run`` (trace.csv, fig4.csv, ...) to OUT_DIR.
"""

import sys
from pathlib import Path

from eatsss import engine
from eatsss.cli import write_run
from eatsss.config import build_config

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-lb")
out.mkdir(parents=True, exist_ok=True)

cfg = build_config("paper-lb")
trace = engine.run(cfg)
report = write_run(trace, out)

print(f"seed {cfg.seed}, {report['epochs']} epochs, config {cfg.config_hash}")
print(f"spearman(5G SINR, 5G weight) = {report['agv_5g_sinr_weight_spearman']:.3f}")
print(f"epochs with 5G SINR > 0 dB but no 5G traffic: {report['agv_5g_good_sinr_zero_weight_epochs']}")
for wat, s in report["agv_per_wat"].items():
    print(f"  {wat:5s} coverage {s['coverage_fraction']:.2f}  steered {s['steered_fraction']:.2f}"
          f"  mean share {s['mean_steered_pct']:.1f} %")
b = report["run"]["bytes"]
print(f"bytes injected {b['injected']}, served {b['served']}, dropped {b['dropped']}, queued {b['queued']}")

# a coarse text view of fig4.csv: one line per 30 s
rows = (out / "fig4.csv").read_text().splitlines()[1:]
for line in rows[::30]:
    t, sinr, weight, _ = line.split(",")
    bar = "#" * int(float(weight) / 5)
    print(f"t={float(t):6.0f}  sinr {float(sinr):7.2f} dB  5G {float(weight):5.1f} % {bar}")
