"""Sweep the normalized threshold q on a shortened paper-lb run.

    python3 demos/threshold_sweep.py

A higher q tightens every eligibility gate, so the AGV's 5G link is used less.
"""

from eatsss import engine
from eatsss.config import read_raw
from eatsss.metrics import rows_from_trace, summarize


def main():
    raw, _ = read_raw("paper-lb")
    base = dict(raw, duration_s=200)
    results = engine.sweep(base, {"normalized_threshold": [0.2, 0.4, 0.6, 0.8]}, threads=2)
    for label, res in results.items():
        if res.error:
            print(f"{label}: failed: {res.error}")
            continue
        s = summarize(rows_from_trace(res.trace), run_info=res.trace.summary)
        g = s["agv_per_wat"]["5G"]
        print(f"{label:26s} seed {res.seed:>20}  5G eligible {g['eligible_fraction']:.2f}"
              f"  5G steered {g['steered_fraction']:.2f}  fallbacks {s['run']['fallback_decisions']}")


if __name__ == "__main__":
    main()
