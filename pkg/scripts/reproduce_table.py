"""Success rate and hazard-exposure distance for every bundled scenario and mode.

Runs the same batch as ``riskfield batch`` and prints a scenario x mode table,
then checks the two orderings the evaluation cares about: ours succeeds at
least as often as no_vlm, and keeps at least as far from hazards as baseline.

    python scripts/reproduce_table.py --trials 50 --out results/table
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from riskfield.scene import BUNDLED, load_scenario
from riskfield.simulator import MODES, run_batch, write_batch_csv, write_summary_json


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", type=Path, default=Path("results/table"))
    args = ap.parse_args(argv)

    start = time.perf_counter()
    batches = {}
    for name in BUNDLED:
        scenario = load_scenario(name)
        for mode in MODES:
            batches[name, mode] = run_batch(scenario, mode, args.trials, args.seed, workers=args.workers)
    elapsed = time.perf_counter() - start

    args.out.mkdir(parents=True, exist_ok=True)
    write_batch_csv(args.out / "batch.csv", batches.values())
    write_summary_json(args.out / "summary.json", batches.values(),
                       {"trials": args.trials, "seed": args.seed, "elapsed_s": round(elapsed, 1)})

    print(f"{'':10s}" + "".join(f"{m:>20s}" for m in MODES))
    for name in BUNDLED:
        cells = [batches[name, m] for m in MODES]
        print(f"{name:10s}" + "".join(
            f"{b.success_rate:9.0f}% {b.mean_hazard_exposure_distance:8.2f} m" for b in cells))
    print(f"({args.trials} trials per cell, base seed {args.seed}, {elapsed:.0f} s)")

    ok = True
    for name in BUNDLED:
        ours, ablated, base = (batches[name, m] for m in MODES)
        success_ok = ours.success_rate >= ablated.success_rate
        exposure_ok = ours.mean_hazard_exposure_distance >= base.mean_hazard_exposure_distance
        ok &= success_ok and exposure_ok
        print(f"{name}: success ours>=no_vlm {'yes' if success_ok else 'NO'}, "
              f"exposure ours>=baseline {'yes' if exposure_ok else 'NO'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
