"""How the weight on the context score changes behaviour on one scenario.

Sweeps ``riskmap.alpha_vlm`` while holding the other weights fixed and reports
success rate and mean hazard-exposure distance for the full mode.

    python scripts/sweep_context_weight.py --scenario scenario3 --trials 20
"""

from __future__ import annotations

import argparse
import sys

from riskfield.scene import load_scenario
from riskfield.simulator import run_batch


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="scenario3")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--weights", type=float, nargs="+", default=[0.0, 0.25, 0.5, 0.75, 1.0])
    args = ap.parse_args(argv)

    base = load_scenario(args.scenario)
    print(f"{'alpha_vlm':>10s} {'success %':>10s} {'exposure m':>11s}")
    for w in args.weights:
        scenario = base.with_overrides([("riskmap", "alpha_vlm", w)])
        b = run_batch(scenario, "ours", args.trials, args.seed)
        print(f"{w:10.2f} {b.success_rate:10.0f} {b.mean_hazard_exposure_distance:11.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
