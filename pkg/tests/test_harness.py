import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from peach import cli, estimators as est
from peach.harness import experiments
from peach.harness.config import ConfigError, ExperimentConfig, config_from_dict, load_config
from peach.harness.report import (
    MSE_HEADER, MseReport, MseRow, read_mse_csv, write_mse_csv,
)
from peach.scenario import identity_scenario, kronecker_scenario

SMALL = {"dims": {"nt": 2, "nr": 4, "b": 2}, "gamma_db": [10.0], "beta": [0.0, 0.1],
         "orders": [0, 2], "trials": 400}


# -- config ------------------------------------------------------------------------


def test_defaults_valid():
    cfg = ExperimentConfig()
    assert cfg.dims.nr == 100 and cfg.n_interferers == 2


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({"gama_db": [1.0]})


def test_nested_unknown_key_rejected():
    with pytest.raises(ConfigError, match="dims"):
        config_from_dict({"dims": {"nt": 2, "nx": 3}})


@pytest.mark.parametrize("bad", [
    {"gamma_db": []}, {"trials": 0}, {"beta": [1.0]}, {"estimators": ["lmmse"]},
    {"orders": [-1]}, {"alpha_rule": "median"}, {"bench": {"sizes": [64, 128]}},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(SMALL))
    cfg = load_config(path)
    assert cfg.dims.b == 2 and cfg.orders == [0, 2]


# -- reports ---------------------------------------------------------------------------


def test_csv_header_and_order(tmp_path):
    rows = [MseRow("peach", 2, 5.0, 0.1, 0.123456789012345),
            MseRow("mmse", 1, 5.0, 0.0, 0.2),
            MseRow("peach", 2, 0.0, 0.1, 0.3)]
    path = tmp_path / "r.csv"
    write_mse_csv(MseReport(rows), path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(MSE_HEADER)
    assert [l.split(",")[:3] for l in lines[1:]] == [["mmse", "1", "5"], ["peach", "2", "0"],
                                                    ["peach", "2", "5"]]
    assert "0.123456789" in lines[3] and "0.1234567890" not in lines[3]


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["mmse", "peach", "wpeach"]), st.integers(0, 20),
                          finite, st.floats(0, 0.99), finite, finite | st.just(math.nan)),
                min_size=1, max_size=8))
def test_csv_round_trip(tmp_path_factory, recs):
    rows = [MseRow(e, L, g, b, a, mc, 0.5, 10, 0.0, 3) for e, L, g, b, a, mc in recs]
    report = MseReport(rows)
    path = tmp_path_factory.mktemp("csv") / "r.csv"
    write_mse_csv(report, path)
    assert read_mse_csv(path).same_values(report)


# -- Monte Carlo -----------------------------------------------------------------------


def test_monte_carlo_thread_independent():
    scn = kronecker_scenario(2, 4, 2, 10.0, 0.1)
    e = est.PEACHEstimator(scn, 3)
    one = experiments.monte_carlo_mse(scn, e, 700, seed=4, threads=1)
    eight = experiments.monte_carlo_mse(scn, e, 700, seed=4, threads=8)
    assert one == eight


def test_monte_carlo_noiseless_mmse():
    scn = kronecker_scenario(2, 4, 2, 120.0)  # gamma = 1e12
    scn_mse, _ = experiments.monte_carlo_mse(scn, est.MMSEEstimator(scn), 200, seed=0)
    assert scn_mse / scn.trace_r < 1e-9


def test_monte_carlo_stderr_from_trials():
    scn = identity_scenario(1, 2, 3.0)
    mse, se = experiments.monte_carlo_mse(scn, est.MMSEEstimator(scn), 2000, seed=1)
    errs = experiments.monte_carlo_errors(
        scn, lambda y, ops: {0: est.MMSEEstimator(scn).apply(y)}, 2000, 1)[0]
    assert se == pytest.approx(errs.std(ddof=1) / math.sqrt(2000))
    assert mse == pytest.approx(errs.mean())


def test_monte_carlo_rejects_zero_trials():
    scn = identity_scenario(1, 2, 3.0)
    with pytest.raises(ValueError):
        experiments.monte_carlo_mse(scn, est.MMSEEstimator(scn), 0, seed=1)


# -- sweeps ----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_sweep():
    return experiments.run_order_sweep(config_from_dict(SMALL))


def test_sweep_rows(small_sweep):
    assert len(small_sweep.rows) == 4 * 2 * 2
    assert small_sweep.meta["config"]["trials"] == 400


def test_mvu_constant_across_orders(small_sweep):
    for beta in (0.0, 0.1):
        vals = {r.nmse_analytic for r in small_sweep.select("mvu", beta=beta)}
        assert len(vals) == 1


def test_sweep_mc_within_three_stderr(small_sweep):
    for r in small_sweep.rows:
        assert abs(r.nmse_mc - r.nmse_analytic) <= 3 * r.stderr, r


def test_sweep_matvec_counts(small_sweep):
    for r in small_sweep.select("peach"):
        assert r.matvecs == r.L + 1


def test_sweep_deterministic(small_sweep):
    again = experiments.run_order_sweep(config_from_dict({**SMALL, "threads": 3}))
    assert again.same_values(small_sweep)


def test_sweep_analytic_only():
    rep = experiments.run_order_sweep(config_from_dict({**SMALL, "monte_carlo": False}))
    assert all(math.isnan(r.nmse_mc) and r.trials == 0 for r in rep.rows)


def test_snr_sweep_identity_closed_form():
    cfg = config_from_dict({"dims": {"nt": 2, "nr": 3, "b": 2}, "gamma_db": [10, 20, 30],
                            "beta": [0.0], "orders": [10], "monte_carlo": False,
                            "correlation": {"r_t": 0.0, "r_r": 0.0}})
    rep = experiments.run_snr_sweep(cfg)
    vals = [rep.value("mmse", gamma_db=g) for g in (10.0, 20.0, 30.0)]
    assert vals == sorted(vals, reverse=True)
    for g, v in zip((10, 20, 30), vals):
        assert v == pytest.approx(1 / (1 + 10 ** (g / 10)), rel=1e-9)


# -- adaptive demo ----------------------------------------------------------------------

DEMO = {"dims": {"nt": 2, "nr": 8, "b": 2}, "gamma_db": [0.0, 10.0], "beta": [0.0],
        "orders": [2], "window": 100, "adaptive_steps": 10,
        "estimators": ["mmse", "wpeach", "wpeach_approx"]}


def test_adaptive_inject_exact_coincides():
    rep = experiments.run_adaptive_demo(config_from_dict(DEMO), inject_exact=True)
    for g in (0.0, 10.0):
        a = rep.value("wpeach_approx", gamma_db=g)
        o = rep.value("wpeach", gamma_db=g)
        assert a == pytest.approx(o, rel=1e-10)


def test_adaptive_tiny_window_worse():
    gaps = {}
    for window in (5, 100):
        rep = experiments.run_adaptive_demo(config_from_dict({**DEMO, "window": window}))
        gaps[window] = sum(rep.value("wpeach_approx", gamma_db=g) - rep.value("wpeach", gamma_db=g)
                           for g in (0.0, 10.0))
    assert gaps[5] > gaps[100]


def test_adaptive_per_update_cost():
    rep = experiments.run_adaptive_demo(config_from_dict(DEMO))
    assert {r.matvecs for r in rep.select("wpeach_approx")} == {4 * 2 + 1}


# -- bench ----------------------------------------------------------------------------


def test_bench_structure():
    cfg = config_from_dict({"bench": {"sizes": [8, 16, 24, 32], "nt": 4, "order": 3,
                                      "repeats": 2}})
    rep = experiments.run_complexity_bench(cfg)
    assert set(rep.fits) == {"mmse", "peach", "wpeach", "mvu"}
    peach = [r for r in rep.rows if r.estimator == "peach"]
    assert {r.matvecs for r in peach} == {4} and {r.solves for r in peach} == {0}
    assert rep.order_ratio > 0


def test_fit_scaling_exact_power():
    fit = experiments.fit_scaling([64, 128, 256, 512], [m ** 2.5 * 1e-6 for m in (64, 128, 256, 512)])
    assert fit.slope == pytest.approx(2.5) and fit.r_squared == pytest.approx(1.0)


# -- CLI -----------------------------------------------------------------------------------


def test_cli_validate(capsys):
    assert cli.main(["validate"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_cli_sweep_to_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(SMALL))
    out = tmp_path / "o.csv"
    assert cli.main(["sweep-order", "--config", str(cfg), "--out", str(out), "--seed", "3",
                     "--trials", "200", "--threads", "2"]) == 0
    rep = read_mse_csv(out)
    assert {r.trials for r in rep.rows} == {200}
    meta = json.loads(out.with_suffix(".csv.meta.json").read_text())
    assert meta["config"]["seed"] == 3


def test_cli_stdout(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**SMALL, "monte_carlo": False}))
    assert cli.main(["sweep-snr", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == ",".join(MSE_HEADER)


def test_cli_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["sweep-order", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err
