"""Sliding-window approximate weights against optimal weights across SNR.

    python3 scripts/adaptive_demo.py --runs 3
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
    parser.add_argument("--config", type=Path, default=ROOT / "configs" / "adaptive.json")
    parser.add_argument("--out", type=Path, default=ROOT / "results" / "adaptive.csv")
    parser.add_argument("--runs", type=int, help="independent streams per point")
    parser.add_argument("--window", type=int, help="window length T")
    parser.add_argument("--inject-exact", action="store_true",
                        help="use the exact weight system (sanity reference)")
    args = parser.parse_args()

    data = json.loads(args.config.read_text())
    if args.runs is not None:
        data["adaptive_runs"] = args.runs
    if args.window is not None:
        data["window"] = args.window
    cfg = config_from_dict(data)
    report = experiments.run_adaptive_demo(cfg, inject_exact=args.inject_exact)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_mse_csv(report, args.out)

    print(f"T={cfg.window}, {cfg.adaptive_runs} runs x {cfg.adaptive_steps} instants")
    print("  SNR   optimal   approx   excess")
    for g in cfg.gamma_db:
        opt = report.value("wpeach", gamma_db=g)
        apx = report.value("wpeach_approx", gamma_db=g)
        print(f"  {g:4.0f}  {opt:7.4f}  {apx:7.4f}  {apx / opt - 1:+7.1%}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
