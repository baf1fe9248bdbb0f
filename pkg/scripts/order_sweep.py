"""Normalized MSE against polynomial order at 5 dB, full-size array.

Writes plot-ready CSV and prints one line per (beta, L).

    python3 scripts/order_sweep.py --analytic
"""

import argparse
import json
from pathlib import Path

from peach.harness import experiments
from peach.harness.config import config_from_dict
from peach.harness.report import write_mse_csv

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=ROOT / "configs" / "order_sweep.json")
    parser.add_argument("--out", type=Path, default=ROOT / "results" / "order_sweep.csv")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    parser.add_argument("--analytic", action="store_true", help="skip Monte Carlo")
    args = parser.parse_args()

    data = json.loads(args.config.read_text())
    if args.trials is not None:
        data["trials"] = args.trials
    if args.analytic:
        data["monte_carlo"] = False
    cfg = config_from_dict(data)
    report = experiments.run_order_sweep(cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_mse_csv(report, args.out)

    for beta in cfg.beta:
        mmse = report.value("mmse", L=cfg.orders[0], beta=beta)
        mvu = report.value("mvu", L=cfg.orders[0], beta=beta)
        print(f"beta={beta:g}: MMSE {mmse:.4f}  MVU {mvu:.4f}")
        print("   L    PEACH   W-PEACH")
        for L in cfg.orders:
            p = report.value("peach", L=L, beta=beta)
            w = report.value("wpeach", L=L, beta=beta)
            print(f"  {L:2d}  {p:7.4f}  {w:7.4f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
