"""Sweeps, Monte Carlo validation, benchmarks and CSV reports."""

from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .experiments import (
    monte_carlo_mse,
    run_adaptive_demo,
    run_complexity_bench,
    run_order_sweep,
    run_snr_sweep,
)
from .report import BenchReport, MseReport, read_mse_csv, write_bench_csv, write_mse_csv
