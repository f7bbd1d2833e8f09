#!/usr/bin/env python3
"""Multi-seed comparison of FedAvg, QFL, and NR-QFL on the default workload.

Runs the full federated experiment for each seed and strategy, then prints a
small table of final accuracy / macro-F1 (mean +/- std over seeds) and the
communication overhead of NR-QFL relative to QFL.

Example:
    python3 scripts/run_comparison.py --seeds 10 --rounds 50
"""

import argparse

import numpy as np

from nrqfl import flsim
from nrqfl.config import ExperimentConfig
from nrqfl.qcore import NoiseModel


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=10, help="number of seeds to average over")
    parser.add_argument("--rounds", type=int, default=50)
    parser.add_argument("--clients", type=int, default=5)
    parser.add_argument("--p-depol", type=float, default=0.05)
    parser.add_argument("--gamma", type=float, default=0.03)
    args = parser.parse_args()

    acc = {s: [] for s in flsim.STRATEGIES}
    f1 = {s: [] for s in flsim.STRATEGIES}
    traffic = {s: 0 for s in flsim.STRATEGIES}
    for seed in range(args.seeds):
        cfg = ExperimentConfig(
            seed=seed,
            rounds=args.rounds,
            n_clients=args.clients,
            noise=NoiseModel(p_depol=args.p_depol, gamma=args.gamma),
        )
        for strategy in flsim.STRATEGIES:
            records = flsim.run_experiment(cfg, strategy)
            acc[strategy].append(records[-1].accuracy)
            f1[strategy].append(records[-1].f1)
            traffic[strategy] += sum(r.bytes_up + r.bytes_down for r in records)
        print(f"seed {seed}: " + "  ".join(f"{s}={acc[s][-1]:.4f}" for s in flsim.STRATEGIES))

    print(f"\n{'strategy':<8}  {'accuracy':>18}  {'macro F1':>18}  {'traffic (MB)':>12}")
    for s in flsim.STRATEGIES:
        a, f = np.array(acc[s]), np.array(f1[s])
        print(f"{s:<8}  {a.mean():>9.4f} +/- {a.std():.4f}  "
              f"{f.mean():>9.4f} +/- {f.std():.4f}  {traffic[s] / 1e6:>12.3f}")
    overhead = traffic["nrqfl"] / traffic["qfl"] - 1.0
    print(f"\nNR-QFL traffic overhead vs QFL: {100 * overhead:.1f}%")


if __name__ == "__main__":
    main()
