"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from peach import adaptive, estimators as est, linalg
from peach.harness import experiments
from peach.harness.config import config_from_dict
from peach.harness.report import write_mse_csv
from peach.scenario import identity_scenario, kronecker_scenario

from conftest import SMALL_SEEDS, random_small_scenario

FULL_DIMS = {"nt": 10, "nr": 100, "b": 10}


# closed forms at the full-size, noise-limited 5 dB point, from
# sum_k lam_k / (1 + p_t lam_k) over products of factor eigenvalues and 1/gamma
FULL_MMSE_5DB = 0.16782629763571105
FULL_MVU_5DB = 0.31622776601683794


def test_c1_identity_closed_forms(criterion):
    t0 = time.perf_counter()
    ok, worst_analytic, worst_mc = True, 0.0, 0.0
    for gamma in (0.5, 3.0, 10.0):
        scn = identity_scenario(2, 4, gamma)
        m = scn.dims.m
        for e, target in ((est.MMSEEstimator(scn), 1 / (1 + gamma)),
                          (est.MVUEstimator(scn), 1 / gamma)):
            worst_analytic = max(worst_analytic, abs(e.mse() / m - target))
            mse, _ = experiments.monte_carlo_mse(scn, e, 10_000, seed=1)
            worst_mc = max(worst_mc, abs(mse / m / target - 1))
    elapsed = time.perf_counter() - t0
    ok = worst_analytic <= 1e-12 and worst_mc < 0.03 and elapsed < 10
    criterion("C1 identity closed forms", ok,
              f"analytic err {worst_analytic:.1e}, MC rel err {worst_mc:.2%}, {elapsed:.1f}s")
    assert ok


def test_c2_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    est_err, mc_err = 0.0, 0.0
    for seed in SMALL_SEEDS:
        scn = random_small_scenario(seed)
        y = linalg.complex_normal(np.random.default_rng(seed), scn.dims.n)
        pt, s_inv = scn.pilot_tilde, np.linalg.inv(scn.s_cov)
        mmse_ref = scn.r_cov @ pt.conj().T @ np.linalg.inv(scn.d_cov) @ y
        mvu_ref = np.linalg.inv(pt.conj().T @ s_inv @ pt) @ pt.conj().T @ s_inv @ y
        for got, ref in ((est.mmse_estimate(scn, y), mmse_ref),
                         (est.mvu_estimate(scn, y), mvu_ref)):
            est_err = max(est_err, np.linalg.norm(linalg.vectorize(got) - ref)
                          / np.linalg.norm(ref))
        for e in (est.PEACHEstimator(scn, 3), est.WPEACHEstimator.optimal(scn, 3)):
            mse, _ = experiments.monte_carlo_mse(scn, e, 10_000, seed=100 + seed)
            mc_err = max(mc_err, abs(mse / e.mse() - 1))
    elapsed = time.perf_counter() - t0
    ok = est_err <= 1e-9 and mc_err < 0.03 and elapsed < 30
    criterion("C2 oracle equivalence", ok,
              f"estimate rel err {est_err:.1e}, MSE formula vs MC {mc_err:.2%}, {elapsed:.1f}s")
    assert ok


def test_c3_convergence(criterion):
    # 5 dB operating point; at 10 dB D is worse conditioned and L=64 is not enough
    t0 = time.perf_counter()

    def gaps_at(gamma_db):
        scn = kronecker_scenario(2, 4, 2, gamma_db, 0.0)
        alpha = est.alpha_peach(scn, "extreme-eig")
        mmse = est.mmse_mse(scn)
        gaps = [est.peach_mse(scn, L, alpha) - mmse for L in (1, 2, 4, 8, 16, 32)]
        return gaps, (est.peach_mse(scn, 64, alpha) - mmse) / mmse

    gaps, rel64 = gaps_at(5.0)
    _, rel64_10db = gaps_at(10.0)
    elapsed = time.perf_counter() - t0
    ok = (all(g > 0 for g in gaps) and all(np.diff(gaps) < 0)
          and rel64 < 1e-6 and elapsed < 10)
    criterion("C3 PEACH convergence", ok,
              f"gap L=1 {gaps[0]:.2e} .. L=32 {gaps[-1]:.2e}, L=64 rel {rel64:.1e} "
              f"(10 dB: {rel64_10db:.1e})")
    assert ok


@pytest.fixture(scope="module")
def full_order_sweep():
    cfg = config_from_dict({"dims": FULL_DIMS, "gamma_db": [5.0], "beta": [0.0, 0.1],
                            "orders": list(range(0, 11)), "monte_carlo": False})
    return experiments.run_order_sweep(cfg)


def _scenarios_for_dominance():
    for seed in SMALL_SEEDS:
        for beta in (0.0, 0.1):
            yield f"small{seed}/b{beta}", random_small_scenario(seed, beta=beta)
    yield "identity", identity_scenario(2, 4, 5.0)
    yield "2x8x2@20dB", kronecker_scenario(2, 8, 2, 20.0, 0.1)


def test_c4_dominance_and_monotonicity(criterion, full_order_sweep):
    worst_dom, worst_mono, tested = -math.inf, -math.inf, 0
    for _, scn in _scenarios_for_dominance():
        ap, aw = est.alpha_peach(scn), est.alpha_wpeach(scn)
        prev = math.inf
        for L in range(0, 16):
            w = est.wpeach_mse(scn, est.wpeach_weights_lstsq(scn, L, aw))
            worst_dom = max(worst_dom, w - est.peach_mse(scn, L, ap))
            worst_mono = max(worst_mono, w - prev)
            prev = w
        tested += 1
    # the full-size scenarios, from the analytic sweep (normalized values)
    for beta in (0.0, 0.1):
        prev = math.inf
        for L in range(0, 11):
            w = full_order_sweep.value("wpeach", L=L, beta=beta)
            worst_dom = max(worst_dom, w - full_order_sweep.value("peach", L=L, beta=beta))
            worst_mono = max(worst_mono, w - prev)
            prev = w
        tested += 1
    ok = worst_dom <= 1e-10 and worst_mono <= 1e-10
    criterion("C4 dominance and monotonicity", ok,
              f"{tested} scenarios, max(W-P) {worst_dom:.1e}, max increase {worst_mono:.1e}")
    assert ok


def test_c5_full_size_order_sweep(criterion, full_order_sweep):
    rep = full_order_sweep
    below_mvu, gap_ok = True, True
    for beta in (0.0, 0.1):
        mvu = rep.value("mvu", L=0, beta=beta)
        mmse = rep.value("mmse", L=0, beta=beta)
        for L in range(0, 11):
            p, w = rep.value("peach", L=L, beta=beta), rep.value("wpeach", L=L, beta=beta)
            if L >= 2:
                below_mvu &= p < mvu and w < mvu
            gap_ok &= (w - mmse) <= (p - mmse) + 1e-12
    closed = (abs(rep.value("mmse", L=0, beta=0.0) - FULL_MMSE_5DB) < 1e-9
              and abs(rep.value("mvu", L=0, beta=0.0) - FULL_MVU_5DB) < 1e-9)
    ok = below_mvu and gap_ok and closed
    criterion("C5 full-size order sweep", ok,
              f"PEACH(L=2) {rep.value('peach', L=2, beta=0.0):.4f} / "
              f"{rep.value('peach', L=2, beta=0.1):.4f} vs MVU "
              f"{rep.value('mvu', L=0, beta=0.0):.4f} / {rep.value('mvu', L=0, beta=0.1):.4f}")
    assert ok


def test_c6_error_floor_and_contamination(criterion):
    cfg = config_from_dict({"dims": FULL_DIMS, "gamma_db": [20.0, 40.0], "beta": [0.0, 0.1],
                            "orders": [10], "estimators": ["mmse", "peach"],
                            "monte_carlo": False})
    rep = experiments.run_snr_sweep(cfg)
    m20 = rep.value("mmse", gamma_db=20.0, beta=0.1)
    m40 = rep.value("mmse", gamma_db=40.0, beta=0.1)
    floor = abs(m20 - m40) / m40

    def rel_gap(beta):
        mmse = rep.value("mmse", gamma_db=20.0, beta=beta)
        return (rep.value("peach", gamma_db=20.0, beta=beta) - mmse) / mmse

    ok = floor < 0.05 and rel_gap(0.1) < rel_gap(0.0)
    criterion("C6 error floor and contamination", ok,
              f"MMSE 20 vs 40 dB {floor:.1%}; PEACH gap b=0.1 {rel_gap(0.1):.3f} "
              f"< b=0 {rel_gap(0.0):.3f}")
    assert ok


def test_c7a_sliding_window_weights(criterion):
    cfg = config_from_dict({"dims": FULL_DIMS, "gamma_db": [0.0, 5.0, 10.0, 15.0, 20.0],
                            "beta": [0.0], "orders": [3], "window": 100,
                            "adaptive_runs": 10, "adaptive_steps": 10,
                            "estimators": ["wpeach", "wpeach_approx"]})
    rep = experiments.run_adaptive_demo(cfg)
    excess = {g: rep.value("wpeach_approx", gamma_db=g) / rep.value("wpeach", gamma_db=g) - 1
              for g in cfg.gamma_db}
    ok = all(abs(v) <= 0.05 for v in excess.values())
    criterion("C7a sliding-window weights (T=100, L=3)", ok,
              "excess " + ", ".join(f"{g:g}dB {v:+.1%}" for g, v in excess.items()))
    assert ok


def test_c7b_sample_moments_unbiased(criterion):
    scn = kronecker_scenario(2, 4, 2, 10.0, 0.0)
    alpha, order, count = est.alpha_wpeach(scn), 3, 10_000
    rng = linalg.substream(7, "unbiased")
    ys = scn.pilot_tilde @ scn.r_factor @ linalg.complex_normal(rng, (scn.dims.m, count)) \
        + scn.s_factor @ linalg.complex_normal(rng, (scn.dims.n, count))
    state = adaptive.window_init(scn, order, 1, alpha, ys[:, :1], rng=rng)
    total = np.zeros_like(state.a_tilde)
    for k in range(1, count + 1):
        total += state.a_tilde
        if k < count:
            state.update(ys[:, k])
    mean_a = total / count
    exact = est.wpeach_weight_system(scn, order, alpha).a_mat
    rel = np.max(np.abs(mean_a / exact - 1))
    ok = rel <= 0.02
    criterion("C7b E[A~] unbiased", ok, f"max rel dev {rel:.2%} over {count} updates")
    assert ok


def test_c8_complexity_scaling(criterion):
    cfg = config_from_dict({"bench": {"sizes": [64, 128, 256, 512], "nt": 4, "order": 16,
                                      "repeats": 30}})
    rep = experiments.run_complexity_bench(cfg, estimators=("mmse", "peach"))
    s_mmse, s_peach = rep.fits["mmse"].slope, rep.fits["peach"].slope
    ratio = rep.order_ratio
    ok = 2.5 <= s_mmse <= 3.3 and 1.7 <= s_peach <= 2.3 and abs(ratio / 2 - 1) <= 0.25
    criterion("C8 complexity scaling", ok,
              f"MMSE slope {s_mmse:.2f} (R2 {rep.fits['mmse'].r_squared:.3f}), "
              f"PEACH slope {s_peach:.2f} (R2 {rep.fits['peach'].r_squared:.3f}), "
              f"2L/L time {ratio:.2f}")
    assert ok


def test_c9_determinism(criterion, tmp_path):
    base = {"dims": {"nt": 2, "nr": 4, "b": 2}, "gamma_db": [0.0, 10.0], "beta": [0.0, 0.1],
            "orders": [1, 4], "trials": 600, "seed": 42,
            "estimators": ["mmse", "mvu", "peach", "wpeach", "wpeach_approx"], "window": 20,
            "adaptive_steps": 15}
    texts = []
    for threads in (1, 1, 4, 8):
        cfg = config_from_dict({**base, "threads": threads})
        blob = []
        for name, rep in (("order", experiments.run_order_sweep(cfg)),
                          ("snr", experiments.run_snr_sweep(cfg)),
                          ("adaptive", experiments.run_adaptive_demo(cfg))):
            path = tmp_path / f"{name}-{threads}-{len(texts)}.csv"
            write_mse_csv(rep, path, meta=False)
            blob.append(path.read_bytes())
        texts.append(b"".join(blob))
    ok = all(t == texts[0] for t in texts)
    criterion("C9 determinism", ok, f"{len(texts)} runs (threads 1,1,4,8) byte-identical: {ok}")
    assert ok
