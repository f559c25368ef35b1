"""Accuracy of the top, middle and bottom thirds of the PPCE ranking as n grows.

For every seed and n in 1..N the model is trained on the first n categories
of each tier. Output: CSV with seed, tier, n and the metrics.

    python scripts/tier_sweep.py --seeds 3 --max-n 10 --out tiers.csv
"""
import argparse
import csv
import sys
from dataclasses import replace

from poigap.boosting import BoostParams
from poigap.pipeline import RunConfig, prepare, run
from poigap.synth import SynthConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--max-n", type=int, default=10)
    ap.add_argument("--rounds", type=int, default=50)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["seed", "tier", "n", "accuracy", "mae", "rmse", "f1"])
    for seed in range(args.seeds):
        base = RunConfig(synth=SynthConfig(seed=seed), seed=seed, boost=BoostParams(rounds=args.rounds))
        prep = prepare(base)
        for tier in ("max", "med", "min"):
            for n in range(1, args.max_n + 1):
                rep = run(replace(base, tier=tier, n=n), prep).report
                w.writerow([seed, tier, n, rep.accuracy, rep.mae, rep.rmse, rep.f1])
                fh.flush()
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
