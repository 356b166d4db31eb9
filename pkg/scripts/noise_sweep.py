#!/usr/bin/env python3
"""Sweep one predictor-noise parameter and track how the strategy gap moves.

Runs a random-selection arm and one competitor at each value of the chosen
noise field, so you can see where a selection strategy's advantage grows,
shrinks, or disappears as the synthetic predictor gets better or worse.
Example:

    python scripts/noise_sweep.py --param sigma_base_px --values 0.1,0.2,0.5,1.0
"""

import argparse
import dataclasses

import numpy as np

from annosim.campaign import run_campaign
from annosim.config import CampaignConfig
from annosim.dataset import SyntheticSpec, generate_synthetic, load_dataset
from annosim.predictor import NoiseModel


def parse_args():
    names = [f.name for f in dataclasses.fields(NoiseModel) if f.name != "seed"]
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", help="dataset YAML (default: benchmark scene)")
    parser.add_argument("--param", required=True, choices=names)
    parser.add_argument("--values", required=True, help="comma-separated values to sweep")
    parser.add_argument("--strategy", default="mvc", help="competitor to compare to rand")
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--iterations", type=int, default=8)
    parser.add_argument("--init-labeled", type=int, default=20)
    parser.add_argument("--batch", type=int, default=10)
    return parser.parse_args()


def main():
    args = parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    values = [float(v) for v in args.values.split(",")]
    dataset = (
        load_dataset(args.dataset) if args.dataset else generate_synthetic(SyntheticSpec())
    )

    print(f"{args.param:>18}  {'rand':>9}  {args.strategy:>9}  {'gain':>7}")
    for value in values:
        noise = dataclasses.replace(NoiseModel(), **{args.param: value})
        means = {}
        for strategy in ("rand", args.strategy):
            cfg = CampaignConfig(
                strategy=strategy,
                init_labeled=args.init_labeled,
                batch_per_iter=args.batch,
                iterations=args.iterations,
                noise=noise,
            )
            means[strategy] = float(
                np.mean([run_campaign(dataset, cfg, s).rows[-1].mkpe_mm for s in seeds])
            )
        gain = 100.0 * (means["rand"] - means[args.strategy]) / means["rand"]
        print(
            f"{value:>18g}  {means['rand']:>6.3f} mm  "
            f"{means[args.strategy]:>6.3f} mm  {gain:>+6.1f}%"
        )


if __name__ == "__main__":
    main()
