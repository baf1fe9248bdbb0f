"""Sweeps, the streaming weight demo, Monte Carlo validation and the complexity bench."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import adaptive, estimators as est, linalg
from ..scenario import Scenario, kronecker_scenario
from .config import ExperimentConfig
from .report import BenchReport, BenchRow, MseReport, MseRow, ScalingFit

#: Trials per Monte Carlo work unit. Fixed, so results do not depend on the thread count.
CHUNK = 128

Evaluator = Callable[[np.ndarray, est.Operators], dict]


def make_scenario(cfg: ExperimentConfig, gamma_db: float, beta: float) -> Scenario:
    corr = cfg.correlation
    return kronecker_scenario(
        cfg.dims.nt, cfg.dims.nr, cfg.dims.b, gamma_db, beta,
        r_t=corr.r_t, r_r=corr.r_r,
        interferer_r=[tuple(p) for p in corr.interferers],
        noise_var=cfg.noise_var,
    )


# -- Monte Carlo ------------------------------------------------------------------


def draw_trials(scn: Scenario, seed: int, trials: range, stream: str = "mc"
                ) -> tuple[np.ndarray, np.ndarray]:
    """Channels and observations ``(m, k)``, ``(n, k)`` for a block of trials.

    Trial ``t`` of ``stream`` draws from substreams ``(seed, stream, t, role)``.
    """
    zh = np.stack([linalg.complex_normal(linalg.substream(seed, stream, t, "channel"),
                                         scn.dims.m) for t in trials], axis=1)
    zn = np.stack([linalg.complex_normal(linalg.substream(seed, stream, t, "noise"),
                                         scn.dims.n) for t in trials], axis=1)
    h = scn.r_factor @ zh
    y = scn.pilot_tilde @ h + scn.s_factor @ zn
    return h, y


def monte_carlo_errors(scn: Scenario, evaluate: Evaluator, trials: int, seed: int,
                       threads: int = 1) -> dict:
    """Per-trial squared errors ``||h - h_hat||^2`` for every estimate ``evaluate`` returns.

    Every trial draws a fresh channel and disturbance from its own
    substream. Trials are cut into fixed chunks, so the output is the same
    for any thread count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    chunks = [range(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]

    def work(idx: range) -> dict:
        h, y = draw_trials(scn, seed, idx)
        estimates = evaluate(y, est.Operators(scn))
        return {k: np.sum(np.abs(h - v) ** 2, axis=0) for k, v in estimates.items()}

    if threads == 1:
        parts = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def summarize(errors: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(errors))
    if errors.size < 2:
        return mean, math.nan
    return mean, float(np.std(errors, ddof=1) / math.sqrt(errors.size))


def monte_carlo_mse(scn: Scenario, estimator: est.Estimator, trials: int, seed: int,
                    threads: int = 1) -> tuple[float, float]:
    """Empirical MSE and its standard error."""
    errs = monte_carlo_errors(scn, lambda y, ops: {0: estimator.apply(y, ops)},
                              trials, seed, threads)
    return summarize(errs[0])


# -- sweep machinery ----------------------------------------------------------------


@dataclass
class _Entry:
    name: str
    order: int | None
    estimator: est.Estimator
    analytic: float


def _approx_weights(scn: Scenario, order: int, cfg: ExperimentConfig, alpha: float,
                    seed: int) -> est.WeightVector:
    """Weights after filling one window of ``cfg.window`` observations."""
    _, y = draw_trials(scn, seed, range(cfg.window), stream="window")
    probes = adaptive.draw_probes(scn.dims.n, cfg.probes or cfg.window,
                                  linalg.substream(seed, "probes"))
    state = adaptive.window_init(scn, order, cfg.window, alpha, y, probes=probes)
    return state.weights()


def _entries(scn: Scenario, cfg: ExperimentConfig, orders, seed: int) -> list[_Entry]:
    out = []
    names = cfg.estimators
    if "mmse" in names or "mvu" in names:
        for name, cls in (("mmse", est.MMSEEstimator), ("mvu", est.MVUEstimator)):
            if name in names:
                e = cls(scn)
                out.extend(_Entry(name, L, e, e.mse()) for L in orders)
    alpha_p = est.alpha_peach(scn, cfg.alpha_rule)
    alpha_w = est.alpha_wpeach(scn)
    for L in orders:
        if "peach" in names:
            e = est.PEACHEstimator(scn, L, alpha_p)
            out.append(_Entry("peach", L, e, e.mse()))
        if "wpeach" in names:
            e = est.WPEACHEstimator(scn, est.wpeach_weights_lstsq(scn, L, alpha_w))
            out.append(_Entry("wpeach", L, e, e.mse()))
        if "wpeach_approx" in names:
            w = _approx_weights(scn, L, cfg, alpha_w, seed)
            e = est.WPEACHEstimator(scn, w, name="wpeach_approx")
            out.append(_Entry("wpeach_approx", L, e, e.mse()))
    return out


def _batched_evaluator(entries: list[_Entry]) -> Evaluator:
    """Apply all estimators to one block, sharing the PEACH and W-PEACH power chains."""

    def evaluate(y: np.ndarray, ops: est.Operators) -> dict:
        out = {}
        peach = [e for e in entries if e.name == "peach"]
        poly = [e for e in entries if e.name in ("wpeach", "wpeach_approx")]
        done_exact = {}
        for i, e in enumerate(entries):
            if e.name in ("mmse", "mvu"):
                if e.name not in done_exact:
                    done_exact[e.name] = e.estimator.apply(y, ops)
                out[i] = done_exact[e.name]
        if peach:
            alpha = peach[0].estimator.alpha
            want = {e.order for e in peach}
            sums = {}
            for L, s in enumerate(est.peach_partial_sums(ops, y, alpha, max(want))):
                if L in want:
                    sums[L] = ops.apply_gain(alpha * s)
            for i, e in enumerate(entries):
                if e.name == "peach":
                    out[i] = sums[e.order]
        if poly:
            alpha = poly[0].estimator.weights.alpha
            z = [alpha * y]
            for _ in range(max(e.order for e in poly)):
                z.append(ops.apply_scaled(z[-1], alpha))
            for i, e in enumerate(entries):
                if e.name in ("wpeach", "wpeach_approx"):
                    w = e.estimator.weights.weights
                    acc = sum(wl * zl for wl, zl in zip(w, z))
                    out[i] = ops.apply_gain(acc)
        return out

    return evaluate


def _single_estimate_cost(e: est.Estimator, y: np.ndarray, timing: bool) -> tuple[int, float]:
    ops = est.Operators(e.scn)
    t0 = time.perf_counter()
    e.apply(y, ops)
    elapsed = (time.perf_counter() - t0) * 1e3 if timing else 0.0
    return ops.matvecs, elapsed


def _sweep(cfg: ExperimentConfig, orders, kind: str, timing: bool = False) -> MseReport:
    rows = []
    for beta in cfg.beta:
        for gamma_db in cfg.gamma_db:
            scn = make_scenario(cfg, gamma_db, beta)
            entries = _entries(scn, cfg, orders, cfg.seed)
            mc = {}
            if cfg.monte_carlo:
                errs = monte_carlo_errors(scn, _batched_evaluator(entries), cfg.trials,
                                          cfg.seed, cfg.threads)
                mc = {i: summarize(v) for i, v in errs.items()}
            y0 = draw_trials(scn, cfg.seed, range(1))[1][:, 0]
            for i, e in enumerate(entries):
                matvecs, wall = _single_estimate_cost(e.estimator, y0, timing)
                mse_mc, se = mc.get(i, (math.nan, math.nan))
                tr = scn.trace_r
                rows.append(MseRow(e.name, e.order, gamma_db, beta, e.analytic / tr,
                                   mse_mc / tr, se / tr, cfg.trials if mc else 0,
                                   wall, matvecs))
    meta = {"kind": kind, "config": cfg.to_dict(), "noise_var": cfg.noise_var,
            "monte_carlo_chunk": CHUNK}
    return MseReport(rows, meta).sorted()


def run_order_sweep(cfg: ExperimentConfig, timing: bool = False) -> MseReport:
    """Normalized MSE against polynomial order at each configured SNR and beta."""
    return _sweep(cfg, sorted(set(cfg.orders)), "order-sweep", timing)


def run_snr_sweep(cfg: ExperimentConfig, timing: bool = False) -> MseReport:
    """Normalized MSE against SNR at fixed order(s), noise-limited and contaminated."""
    return _sweep(cfg, sorted(set(cfg.orders)), "snr-sweep", timing)


# -- streaming weights ------------------------------------------------------------


def run_adaptive_demo(cfg: ExperimentConfig, inject_exact: bool = False,
                      timing: bool = False) -> MseReport:
    """Stream observations through the sliding-window weight estimator.

    For every SNR, ``cfg.adaptive_runs`` independent streams are run. Each
    fills the window with ``cfg.window`` observations and then slides it
    ``cfg.adaptive_steps`` times; at every instant the current approximate
    weights estimate that instant's channel. ``nmse_analytic`` of
    ``wpeach_approx`` is the analytic MSE of the weights in use, averaged
    over instants and runs; ``nmse_mc`` is the streaming empirical error,
    with the optimal-weight estimator scored on the same data.

    Instants of one run share most of their window, so the runs, not the
    instants, are what average over the randomness of the weights.
    """
    rows = []
    steps, runs = cfg.adaptive_steps, cfg.adaptive_runs
    for beta in cfg.beta:
        for gamma_db in cfg.gamma_db:
            scn = make_scenario(cfg, gamma_db, beta)
            alpha = est.alpha_wpeach(scn)
            tr = scn.trace_r
            for L in sorted(set(cfg.orders)):
                optimal = est.WPEACHEstimator(scn, est.wpeach_weights_lstsq(scn, L, alpha))
                exact = est.wpeach_weight_system(scn, L, alpha) if inject_exact else None
                analytic, err_approx, err_opt = [], [], []
                spent = 0.0
                for run in range(runs):
                    h, y = draw_trials(scn, cfg.seed, range(cfg.window + steps),
                                       stream=f"stream{run}")
                    probes = adaptive.draw_probes(scn.dims.n, cfg.probes or cfg.window,
                                                  linalg.substream(cfg.seed, "probes", run))
                    state = adaptive.window_init(scn, L, cfg.window, alpha,
                                                 y[:, : cfg.window], probes=probes)
                    if exact is not None:
                        state.inject(exact)
                    for t in range(cfg.window, cfg.window + steps):
                        t0 = time.perf_counter()
                        state.update(y[:, t])
                        w = state.weights()
                        spent += time.perf_counter() - t0
                        analytic.append(est.wpeach_mse(scn, w))
                        h_hat = est.wpeach_apply(scn, y[:, t], w)
                        err_approx.append(np.sum(np.abs(h[:, t] - h_hat) ** 2))
                        err_opt.append(np.sum(np.abs(h[:, t] - optimal.apply(y[:, t])) ** 2))
                count = runs * steps
                wall = spent * 1e3 / count if timing else 0.0
                per_update = _update_cost(state, y[:, -1])
                mean_opt, se_opt = summarize(np.array(err_opt))
                mean_apx, se_apx = summarize(np.array(err_approx))
                rows.append(MseRow("wpeach", L, gamma_db, beta, optimal.mse() / tr,
                                   mean_opt / tr, se_opt / tr, count, 0.0, L + 1))
                rows.append(MseRow("wpeach_approx", L, gamma_db, beta,
                                   float(np.mean(analytic)) / tr, mean_apx / tr,
                                   se_apx / tr, count, wall, per_update))
                if "mmse" in cfg.estimators:
                    rows.append(MseRow("mmse", L, gamma_db, beta, est.mmse_mse(scn) / tr))
    meta = {"kind": "adaptive-demo", "config": cfg.to_dict(), "inject_exact": inject_exact}
    return MseReport(rows, meta).sorted()


def _update_cost(state: adaptive.SlidingWindowState, y: np.ndarray) -> int:
    """Operator applications of one window update (without mutating ``state``)."""
    ops = est.Operators(state.scn)
    adaptive.sample_moments(ops, y, state.alpha, state.order)
    return ops.matvecs


# -- complexity bench ---------------------------------------------------------------


def fit_scaling(sizes, times) -> ScalingFit:
    """Least-squares line through ``(log M, log t)``."""
    x = np.log(np.asarray(sizes, dtype=float))
    yv = np.log(np.asarray(times, dtype=float))
    slope, intercept = np.polyfit(x, yv, 1)
    resid = yv - (slope * x + intercept)
    ss_tot = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(slope), float(intercept), r2)


def _bench_paths(scn: Scenario, order: int) -> dict[str, tuple[Callable, int, int]]:
    """Estimate paths as ``name -> (call, matvecs, solves)``.

    MMSE and MVU include their factorizations, as they would when the
    statistics change; the polynomial estimators apply precomputed ``D``.
    """
    peach = est.PEACHEstimator(scn, order)
    wpeach = est.WPEACHEstimator(scn, est.peach_weights(order, peach.alpha))
    return {
        "mmse": (lambda y: est.mmse_apply(scn, y), 1, 1),
        "mvu": (lambda y: est.mvu_apply(scn, y), 0, 2),
        "peach": (peach.apply, order + 1, 0),
        "wpeach": (wpeach.apply, order + 1, 0),
    }


def _time_calls(call, arg, repeats: int) -> list[float]:
    call(arg)  # warm caches and lazy state
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        call(arg)
        out.append(time.perf_counter() - t0)
    return out


def run_complexity_bench(cfg: ExperimentConfig, estimators=("mmse", "peach", "wpeach", "mvu")
                         ) -> BenchReport:
    """Wall time of one estimate against channel dimension M.

    Each (estimator, size) pair gets one warm-up call and then
    ``bench.repeats`` back-to-back timed calls; the median is reported.
    """
    bc = cfg.bench
    scns = {}
    for m in bc.sizes:
        nr = m // bc.nt
        scns[m] = kronecker_scenario(bc.nt, nr, bc.nt, 10.0, 0.1,
                                     r_t=cfg.correlation.r_t, r_r=cfg.correlation.r_r)
    rng = linalg.substream(cfg.seed, "bench")
    ys = {m: linalg.complex_normal(rng, scns[m].dims.n) for m in bc.sizes}
    paths = {m: _bench_paths(scns[m], bc.order) for m in bc.sizes}
    samples: dict[tuple[str, int], list[float]] = {}
    for m in bc.sizes:
        for name in estimators:
            samples[(name, m)] = _time_calls(paths[m][name][0], ys[m], bc.repeats)
    # second PEACH order at the largest size, for the linear-in-L check
    m_big = max(bc.sizes)
    peach_2l = est.PEACHEstimator(scns[m_big], 2 * bc.order)
    samples[("peach_2L", m_big)] = _time_calls(peach_2l.apply, ys[m_big], bc.repeats)
    rows = []
    for (name, m), ts in samples.items():
        if name == "peach_2L":
            order, matvecs, solves = 2 * bc.order, 2 * bc.order + 1, 0
        else:
            _, matvecs, solves = paths[m][name]
            order = bc.order if name in ("peach", "wpeach") else None
        rows.append(BenchRow(name, m, order, float(np.median(ts)) * 1e3,
                             float(np.min(ts)) * 1e3, matvecs, solves))
    report = BenchReport(rows, meta={"config": cfg.to_dict()})
    for name in estimators:
        sizes, med = report.times(name)
        report.fits[name] = fit_scaling(sizes, med)
    base = report.times("peach")[1][-1]
    report.order_ratio = report.times("peach_2L")[1][0] / base
    return report
