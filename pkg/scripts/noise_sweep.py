#!/usr/bin/env python3
"""Sweep the depolarizing noise level and report final accuracy per strategy.

Shows where unmitigated quantum aggregation (QFL) starts losing accuracy and
how far the mitigation stack (NR-QFL) pushes the usable noise range.

Example:
    python3 scripts/noise_sweep.py --values 0 0.02 0.05 0.1 0.15 --rounds 30
"""

import argparse

import numpy as np

from nrqfl import flsim
from nrqfl.config import ExperimentConfig
from nrqfl.qcore import NoiseModel


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--values", type=float, nargs="+",
                        default=[0.0, 0.02, 0.05, 0.1, 0.15])
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--rounds", type=int, default=30)
    args = parser.parse_args()

    print(f"{'p_depol':>8}  " + "  ".join(f"{s:>8}" for s in flsim.STRATEGIES))
    for p in args.values:
        finals = {s: [] for s in flsim.STRATEGIES}
        for seed in range(args.seeds):
            cfg = ExperimentConfig(seed=seed, rounds=args.rounds,
                                   noise=NoiseModel(p_depol=p, gamma=0.03))
            for strategy in flsim.STRATEGIES:
                finals[strategy].append(flsim.run_experiment(cfg, strategy)[-1].accuracy)
        print(f"{p:>8.3f}  " + "  ".join(
            f"{np.mean(finals[s]):>8.4f}" for s in flsim.STRATEGIES))


if __name__ == "__main__":
    main()
