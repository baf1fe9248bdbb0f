"""Report containers and their CSV form."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TextIO

MSE_HEADER = ["estimator", "L", "gamma_db", "beta", "nmse_analytic", "nmse_mc",
              "stderr", "trials", "walltime_ms", "matvecs"]
BENCH_HEADER = ["estimator", "M", "L", "median_ms", "min_ms", "matvecs", "solves"]


def r10(x: float) -> float:
    """Round to the 10 significant digits used in CSV output."""
    return float(f"{x:.10g}")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


@dataclass(frozen=True)
class MseRow:
    estimator: str
    L: int | None
    gamma_db: float
    beta: float
    nmse_analytic: float
    nmse_mc: float = math.nan
    stderr: float = math.nan
    trials: int = 0
    walltime_ms: float = 0.0
    matvecs: int = 0

    def __post_init__(self):
        for name in ("gamma_db", "beta", "nmse_analytic", "nmse_mc", "stderr", "walltime_ms"):
            object.__setattr__(self, name, r10(float(getattr(self, name))))

    def sort_key(self):
        return (self.estimator, -1 if self.L is None else self.L, self.gamma_db, self.beta)

    def same_values(self, other: "MseRow") -> bool:
        """Equality that treats NaN as equal to NaN."""
        a, b = asdict(self), asdict(other)
        return all(
            (isinstance(a[k], float) and math.isnan(a[k]) and math.isnan(b[k])) or a[k] == b[k]
            for k in a
        )


@dataclass
class MseReport:
    rows: list[MseRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def sorted(self) -> "MseReport":
        return MseReport(sorted(self.rows, key=MseRow.sort_key), dict(self.meta))

    def select(self, estimator: str | None = None, **where) -> list[MseRow]:
        out = []
        for row in self.rows:
            if estimator is not None and row.estimator != estimator:
                continue
            if all(getattr(row, k) == v for k, v in where.items()):
                out.append(row)
        return out

    def value(self, estimator: str, field_name: str = "nmse_analytic", **where) -> float:
        rows = self.select(estimator, **where)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {estimator} {where}")
        return getattr(rows[0], field_name)

    def same_values(self, other: "MseReport", ignore_timing: bool = False) -> bool:
        if len(self.rows) != len(other.rows):
            return False
        for a, b in zip(self.sorted().rows, other.sorted().rows):
            if ignore_timing:
                a = MseRow(**{**asdict(a), "walltime_ms": 0.0})
                b = MseRow(**{**asdict(b), "walltime_ms": 0.0})
            if not a.same_values(b):
                return False
        return True


def write_mse_rows(report: MseReport, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(MSE_HEADER)
    for row in report.sorted().rows:
        writer.writerow([_fmt(getattr(row, k)) for k in MSE_HEADER])


def write_mse_csv(report: MseReport, path: str | Path, meta: bool = True) -> None:
    """CSV plus a ``<path>.meta.json`` sidecar holding the config and defaults."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        write_mse_rows(report, fh)
    if meta and report.meta:
        with open(path.with_suffix(path.suffix + ".meta.json"), "w") as fh:
            json.dump(report.meta, fh, indent=2, sort_keys=True, default=str)


def read_mse_csv(path: str | Path) -> MseReport:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MSE_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        for rec in reader:
            rows.append(MseRow(
                estimator=rec["estimator"],
                L=int(rec["L"]) if rec["L"] else None,
                gamma_db=float(rec["gamma_db"]),
                beta=float(rec["beta"]),
                nmse_analytic=float(rec["nmse_analytic"]),
                nmse_mc=float(rec["nmse_mc"]),
                stderr=float(rec["stderr"]),
                trials=int(rec["trials"]),
                walltime_ms=float(rec["walltime_ms"]),
                matvecs=int(rec["matvecs"]),
            ))
    return MseReport(rows)


@dataclass(frozen=True)
class BenchRow:
    estimator: str
    M: int
    L: int | None
    median_ms: float
    min_ms: float
    matvecs: int
    solves: int


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    fits: dict[str, ScalingFit] = field(default_factory=dict)
    order_ratio: float = math.nan
    meta: dict = field(default_factory=dict)

    def times(self, estimator: str, stat: str = "median_ms") -> tuple[list[int], list[float]]:
        rows = sorted((r for r in self.rows if r.estimator == estimator), key=lambda r: r.M)
        return [r.M for r in rows], [getattr(r, stat) for r in rows]


def write_bench_csv(report: BenchReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        for row in sorted(report.rows, key=lambda r: (r.estimator, r.M, r.L or -1)):
            writer.writerow([_fmt(getattr(row, k)) for k in BENCH_HEADER])
    summary = {
        "fits": {k: asdict(v) for k, v in report.fits.items()},
        "order_ratio": report.order_ratio,
        **report.meta,
    }
    with open(path.with_suffix(path.suffix + ".meta.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=str)
