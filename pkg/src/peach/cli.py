"""Command line entry point: ``peach <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import experiments
from .harness.config import ConfigError, config_from_dict
from .harness.report import write_bench_csv, write_mse_csv, write_mse_rows

# Per-subcommand defaults; a --config file overrides them key by key.
DEFAULTS = {
    "sweep-order": {},
    "sweep-snr": {"gamma_db": [float(g) for g in range(0, 45, 5)], "orders": [10]},
    "adaptive-demo": {
        "gamma_db": [0.0, 5.0, 10.0, 15.0, 20.0], "beta": [0.0], "orders": [3],
        "window": 100, "adaptive_steps": 20,
        "estimators": ["mmse", "wpeach", "wpeach_approx"],
    },
    "bench": {},
}


def _config(args):
    data = dict(DEFAULTS.get(args.command, {}))
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    for key in ("seed", "trials", "threads"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if getattr(args, "analytic", False):
        data["monte_carlo"] = False
    if args.out:
        data["out"] = args.out
    return config_from_dict(data)


def _emit_mse(report, cfg) -> None:
    if cfg.out:
        write_mse_csv(report, cfg.out)
        print(f"wrote {len(report.rows)} rows to {cfg.out}", file=sys.stderr)
    else:
        write_mse_rows(report, sys.stdout)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peach",
        description="Polynomial-expansion channel estimation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sweep-order": "normalized MSE against polynomial order",
        "sweep-snr": "normalized MSE against SNR",
        "adaptive-demo": "sliding-window approximate weights against optimal weights",
        "bench": "wall time and operation counts against channel dimension",
        "validate": "run the fast invariant checks",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, help="JSON config (ExperimentConfig keys)")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per point")
        p.add_argument("--threads", type=int, help="Monte Carlo worker threads")
        if name in ("sweep-order", "sweep-snr", "adaptive-demo"):
            p.add_argument("--analytic", action="store_true",
                           help="skip Monte Carlo (sweeps only)")
            p.add_argument("--timing", action="store_true",
                           help="record wall time per estimate (not reproducible)")
        if name == "adaptive-demo":
            p.add_argument("--inject-exact", action="store_true",
                           help="replace the sampled system by the exact one")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        from .validate import run_checks

        return 0 if run_checks() else 1
    try:
        cfg = _config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "sweep-order":
        _emit_mse(experiments.run_order_sweep(cfg, timing=args.timing), cfg)
    elif args.command == "sweep-snr":
        _emit_mse(experiments.run_snr_sweep(cfg, timing=args.timing), cfg)
    elif args.command == "adaptive-demo":
        report = experiments.run_adaptive_demo(cfg, inject_exact=args.inject_exact,
                                               timing=args.timing)
        _emit_mse(report, cfg)
    elif args.command == "bench":
        report = experiments.run_complexity_bench(cfg)
        out = cfg.out or "bench.csv"
        write_bench_csv(report, out)
        for name, fit in report.fits.items():
            print(f"{name:8s} slope {fit.slope:5.2f}  R^2 {fit.r_squared:.3f}")
        print(f"peach time ratio 2L/L: {report.order_ratio:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
