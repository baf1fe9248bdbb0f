"""Wall time of the estimators against channel dimension, with log-log slopes.

    python3 scripts/bench.py
"""

import argparse
import json
from pathlib import Path

from peach.harness import experiments
from peach.harness.config import config_from_dict
from peach.harness.report import write_bench_csv

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=ROOT / "configs" / "bench.json")
    parser.add_argument("--out", type=Path, default=ROOT / "results" / "bench.csv")
    parser.add_argument("--repeats", type=int)
    args = parser.parse_args()

    data = json.loads(args.config.read_text())
    if args.repeats is not None:
        data.setdefault("bench", {})["repeats"] = args.repeats
    cfg = config_from_dict(data)
    report = experiments.run_complexity_bench(cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_bench_csv(report, args.out)

    for name, fit in report.fits.items():
        _, times = report.times(name)
        print(f"{name:8s} slope {fit.slope:5.2f}  R^2 {fit.r_squared:.3f}  "
              + " ".join(f"{t:8.3f}" for t in times) + " ms")
    print(f"peach time ratio 2L/L at largest M: {report.order_ratio:.2f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
