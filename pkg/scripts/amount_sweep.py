"""Accuracy against the number of selected POIs, through the sweep ledger.

Runs ``sweep`` for each seed over n in the given list and methods, appending
every run to one ledger CSV (the plotting interface).

    python scripts/amount_sweep.py --seeds 2 --n-list 0,1,2,4,8,16 --out runs/amount
"""
import argparse
from dataclasses import replace
from pathlib import Path

from poigap.boosting import BoostParams
from poigap.pipeline import RunConfig, read_ledger, sweep
from poigap.synth import SynthConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=2)
    ap.add_argument("--n-list", default="0,1,2,3,4,5,6,7,8,9,10")
    ap.add_argument("--methods", default="ppce,random")
    ap.add_argument("--rounds", type=int, default=50)
    ap.add_argument("--out", default="runs/amount")
    args = ap.parse_args(argv)

    n_list = [int(v) for v in args.n_list.split(",")]
    ledger = Path(args.out) / "ledger.csv"
    for seed in range(args.seeds):
        cfg = RunConfig(synth=SynthConfig(seed=seed), seed=seed, boost=BoostParams(rounds=args.rounds),
                        out_dir=str(Path(args.out) / f"seed{seed}"), ledger=str(ledger))
        sweep(replace(cfg), n_list, args.methods.split(","))
    for row in read_ledger(ledger):
        print(row["seed"], row["method"], row["n"], row["accuracy"])


if __name__ == "__main__":
    main()
