#!/usr/bin/env python3
"""Accuracy/cost frontier over the upload threshold.

Sweeps the entropy threshold delta across [0, 1] on a fixed lifecycle and
prints one row per delta: overall accuracy, upload rate, and mean per-sample
energy and latency. Low delta buys accuracy with cloud energy and round
trips; high delta keeps everything on the cheap edge model. Renders an ASCII
chart of the frontier; use --csv to emit machine-readable rows instead.

Usage: python scripts/plot_delta_frontier.py [--seed N] [--steps K] [--csv]
"""

import argparse

from ecc_sim.cli import _frontier_rows
from ecc_sim.config import (CloudConfig, DataConfig, ExperimentConfig,
                            TrainSection)
from ecc_sim.losses import LossWeights


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps", type=int, default=11,
                        help="number of evenly spaced thresholds")
    parser.add_argument("--csv", action="store_true",
                        help="print CSV rows instead of the chart")
    args = parser.parse_args()

    config = ExperimentConfig(
        data=DataConfig(n_classes=8, dim=16, n_per_class=100, spread=0.3,
                        u=4, v=2),
        cloud=CloudConfig(perfect_oracle=True),
        losses=LossWeights(lambda2=0.0),
        train=TrainSection(seed=args.seed),
    )
    deltas = [i / (args.steps - 1) for i in range(args.steps)]
    rows, _ = _frontier_rows(config, deltas)

    if args.csv:
        print("delta,accuracy,upload_rate,mean_energy_mJ,mean_latency_ms")
        for delta, acc, upload, energy, latency in rows:
            print(f"{delta},{acc},{upload},{energy},{latency}")
        return

    print(f"{'delta':>6} {'acc':>6} {'upload':>7} {'energy mJ':>11} "
          f"{'latency ms':>11}  accuracy bar")
    for delta, acc, upload, energy, latency in rows:
        bar = "#" * int(round(acc * 40))
        print(f"{delta:6.2f} {acc:6.3f} {upload:7.3f} {energy:11.3e} "
              f"{latency:11.3f}  {bar}")


if __name__ == "__main__":
    main()
