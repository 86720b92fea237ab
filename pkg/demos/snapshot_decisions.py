"""Feed the three reference AGV snapshots through the table1 policies.

    python3 demos/snapshot_decisions.py
"""

from eatsss import WATS, round_weights
from eatsss.calibration import PUBLISHED, decide_snapshot, ordering_checks, stretch_checks
from eatsss.config import build_config
from eatsss.traffic import TrafficType

cfg = build_config("table1")
lb = cfg.policies[TrafficType.EMBB]
sd = cfg.policies[TrafficType.URLLC]

for k in (1, 2, 3):
    d_lb = decide_snapshot(k, lb)
    d_sd = decide_snapshot(k, sd)
    shown = round_weights(d_lb.lb_weights)
    print(f"instance {k}")
    print("  LB weights  ", " ".join(f"{w.value}={shown[w]:>3}" for w in WATS), "  published", PUBLISHED[k]["LB"])
    print("  SD selection", " ".join(f"{w.value}={int(d_sd.sd_selection[w])}" for w in WATS),
          "  published", tuple(int(x) for x in PUBLISHED[k]["SD"]))

print()
for c in ordering_checks(lb, sd) + stretch_checks(lb):
    print(f"{'ok  ' if c.ok else 'FAIL'} {c.name}: {c.detail}")
