"""Command-line runner: experiments, the invariant suite, and parameter sweeps.

Exit codes: 0 ok, 1 validation failure, 2 config error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import flsim, qagg, validate
from .config import ConfigError, ExperimentConfig, parse_config
from .encode import HALF_PI

CSV_HEADER = ["round", "strategy", "accuracy", "f1", "grad_variance", "bytes_up", "bytes_down", "selected", "wall_ms"]


def _fmt(x) -> str:
    return f"{x:.12g}" if isinstance(x, float) else str(x)


def _csv_row(rec: flsim.RoundRecord) -> list:
    return [
        rec.round,
        rec.strategy,
        _fmt(rec.accuracy),
        _fmt(rec.f1),
        _fmt(rec.grad_variance),
        rec.bytes_up,
        rec.bytes_down,
        ";".join(str(c) for c in rec.selected),
        rec.wall_ms,
    ]


def _write_rounds_csv(path: Path, records: list) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow(_csv_row(rec))


def cmd_run(cfg: ExperimentConfig) -> int:
    all_records = []
    per_strategy = {}
    for strategy in cfg.strategies:
        records = flsim.run_experiment(cfg, strategy)
        all_records.extend(records)
        per_strategy[strategy] = records

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rounds_csv(out / "rounds.csv", all_records)

    summary = {"config": cfg.to_dict(), "invariant_suite_version": validate.SUITE_VERSION, "strategies": {}}
    for strategy, records in per_strategy.items():
        final = records[-1] if records else None
        summary["strategies"][strategy] = {
            "final_accuracy": final.accuracy if final else None,
            "final_f1": final.f1 if final else None,
            "total_bytes_up": int(sum(r.bytes_up for r in records)),
            "total_bytes_down": int(sum(r.bytes_down for r in records)),
            "mean_epsilon": float(np.mean([r.epsilon for r in records])) if records else 0.0,
            "mean_agg_error": float(np.mean([r.agg_error for r in records])) if records else 0.0,
            "total_clipped": int(sum(r.clip_count for r in records)),
            "round_epsilon": [r.epsilon for r in records],
        }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {out / 'rounds.csv'} and {out / 'summary.json'}")
    return 0


def cmd_validate(inject_broken_channel: bool = False) -> int:
    results = validate.run_suite(inject_broken_channel=inject_broken_channel)
    failed = 0
    for r in results:
        tag = "PASS" if r.passed else "FAIL"
        print(f"[{tag}] {r.name}: {r.detail}")
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed (suite {validate.SUITE_VERSION})")
    return 0 if failed == 0 else 1


SWEEP_HEADER = ["axis", "value", "strategy", "final_accuracy", "final_f1", "mean_agg_error", "empirical_variance", "bytes_total"]


def _sweep_variance(cfg: ExperimentConfig, strategy: str, depth: int) -> float:
    """Estimate-per-round variance at this configuration's depth and shot count."""
    if strategy == "fedavg":
        return 0.0
    rng = np.random.default_rng([cfg.seed, 0x5E])
    angles = np.linspace(0.3, 0.9, depth)
    plan = qagg.build_plan(angles)
    if strategy == "nrqfl":
        return qagg.empirical_mitigated_variance(plan, cfg.noise, cfg.shots, 300, rng)
    return qagg.empirical_variance(plan, cfg.noise, cfg.shots, 300, rng)


def cmd_sweep(cfg: ExperimentConfig, axis: str, values: list) -> int:
    if len(values) < 2:
        raise ConfigError("sweep needs at least two axis values")
    rows = []
    for value in values:
        if axis == "shots":
            run_cfg = cfg.replace(shots=int(value))
        elif axis == "noise":
            run_cfg = cfg.replace(noise=cfg.noise.__class__(
                p_depol=float(value), p_deph=cfg.noise.p_deph,
                gamma=cfg.noise.gamma, readout_flip=cfg.noise.readout_flip))
        elif axis == "depth":
            run_cfg = cfg.replace(n_clients=int(value), selection_m=None)
        else:
            raise ConfigError(f"unknown sweep axis {axis!r}")
        depth = min(run_cfg.n_clients, qagg.MAX_GROUP)
        for strategy in run_cfg.strategies:
            records = flsim.run_experiment(run_cfg, strategy)
            final = records[-1]
            rows.append([
                axis, _fmt(float(value)), strategy,
                _fmt(final.accuracy), _fmt(final.f1),
                _fmt(float(np.mean([r.agg_error for r in records]))),
                _fmt(_sweep_variance(run_cfg, strategy, depth)),
                int(sum(r.bytes_up + r.bytes_down for r in records)),
            ])
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nrqfl", description="Noise-resilient quantum federated aggregation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--strategy", help="comma-separated strategies (fedavg,qfl,nrqfl)")

    run = sub.add_parser("run", help="run the federated experiment and write rounds.csv / summary.json")
    add_common(run)

    val = sub.add_parser("validate", help="run the invariant suite")
    val.add_argument("--inject-broken-channel", action="store_true",
                     help="debug: add a non-complete Kraus set (the suite must fail)")

    sweep = sub.add_parser("sweep", help="sweep one axis and write sweep.csv")
    add_common(sweep)
    sweep.add_argument("--axis", required=True, choices=("shots", "depth", "noise"))
    sweep.add_argument("--values", required=True, help="comma-separated axis values")
    return parser


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.out is not None:
        out["out_dir"] = args.out
    if args.strategy is not None:
        out["strategies"] = [s.strip() for s in args.strategy.split(",") if s.strip()]
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(inject_broken_channel=args.inject_broken_channel)
    try:
        cfg = parse_config(args.config, _overrides(args))
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_sweep(cfg, args.axis, values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 3
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
