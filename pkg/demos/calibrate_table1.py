"""Re-run the maxima search behind the shipped table1 LB policy.

    python3 demos/calibrate_table1.py [N_SEEDS]

Takes a minute or so per seed.  Prints per-WAT maxima in the layout used by
``data/table1.yaml`` and the resulting snapshot weights.
"""

import sys

import numpy as np

from eatsss import WATS, NormalizationMaxima, SteeringPolicy
from eatsss.calibration import calibrate_lb, calibration_loss, decide_snapshot
from eatsss.config import build_config
from eatsss.traffic import TrafficType

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 2
lb = build_config("table1").policies[TrafficType.EMBB]

maxima = calibrate_lb(lb.weights, seeds=range(n_seeds), maxiter=300)
for wat, (s, b, d) in maxima.items():
    print(f"{wat.value}: {{sinr: {s:.6g}, buffer: {b:.6g}, delay: {d:.6g}}}")

fitted = SteeringPolicy(lb.mode, lb.weights, lb.thresholds, lb.maxima,
                        {w: NormalizationMaxima(*maxima[w]) for w in WATS})
for k in (1, 2, 3):
    w = decide_snapshot(k, fitted).lb_weights
    print(f"instance {k}:", " ".join(f"{x.value}={w[x]:.1f}" for x in WATS))

x = np.log([v for w in WATS for v in maxima[w]])
print(f"loss {calibration_loss(x, lb.weights, margin=0.0):.3g} (below 1000 means every hard outcome holds)")
