"""How the shortage threshold and the base rate shape the f1 comparison.

For each (base_rate, shortage_threshold) pair, counts the seeds where the
PPCE-selected model's f1 is at least the random-selection model's f1, and
reports the share of positive test cells. Useful for seeing why f1 at
threshold 1 favours blurrier models when most cells have a nonzero gap.

    python scripts/f1_threshold_study.py --seeds 10
"""
import argparse
from dataclasses import replace

import numpy as np

from poigap.gaps import FeatureConfig
from poigap.metrics import f1
from poigap.pipeline import RunConfig, items, prepare, run
from poigap.synth import SynthConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--base-rates", default="0.5,1.0,2.0")
    ap.add_argument("--thresholds", default="0.5,1,2,3")
    args = ap.parse_args(argv)
    thresholds = [float(t) for t in args.thresholds.split(",")]

    print("base_rate threshold positive_share ppce_wins mean_f1_ppce mean_f1_random")
    for rate in (float(r) for r in args.base_rates.split(",")):
        stats = {t: [] for t in thresholds}
        for seed in range(args.seeds):
            cfg = RunConfig(synth=SynthConfig(seed=seed, base_rate=rate), seed=seed)
            prep = prepare(cfg)
            preds = {}
            for method in ("ppce", "random"):
                res = run(replace(cfg, method=method), prep)
                test = items(prep, FeatureConfig(cfg.lag_count, selected_pois=tuple(res.selected)),
                             prep.test_range)
                preds[method] = (res.model.predict(test.rows), test.targets)
            for t in thresholds:
                fp = f1(*preds["ppce"], t)[2]
                fr = f1(*preds["random"], t)[2]
                stats[t].append((fp >= fr, fp, fr, np.mean(preds["ppce"][1] >= t)))
        for t, s in stats.items():
            s = np.array(s, dtype=float)
            print(f"{rate:9.2f} {t:9.2f} {s[:, 3].mean():14.3f} {int(s[:, 0].sum()):>6}/{len(s)} "
                  f"{s[:, 1].mean():12.4f} {s[:, 2].mean():14.4f}")


if __name__ == "__main__":
    main()
