"""Normalized MSE against SNR at fixed order, with and without pilot contamination.

    python3 scripts/snr_sweep.py --analytic
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
    parser.add_argument("--config", type=Path, default=ROOT / "configs" / "snr_sweep.json")
    parser.add_argument("--out", type=Path, default=ROOT / "results" / "snr_sweep.csv")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--analytic", action="store_true", help="skip Monte Carlo")
    args = parser.parse_args()

    data = json.loads(args.config.read_text())
    if args.trials is not None:
        data["trials"] = args.trials
    if args.analytic:
        data["monte_carlo"] = False
    cfg = config_from_dict(data)
    report = experiments.run_snr_sweep(cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_mse_csv(report, args.out)

    names = [e for e in ("mmse", "mvu", "peach", "wpeach") if e in cfg.estimators]
    for beta in cfg.beta:
        print(f"beta={beta:g}")
        print("  SNR  " + "  ".join(f"{n:>8s}" for n in names))
        for g in cfg.gamma_db:
            vals = [report.select(n, gamma_db=g, beta=beta)[0].nmse_analytic for n in names]
            print(f"  {g:4.0f}  " + "  ".join(f"{v:8.4f}" for v in vals))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
