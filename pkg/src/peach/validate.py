"""Fast invariant checks on small scenarios, run by ``peach validate``."""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import Callable

import numpy as np

from . import adaptive, estimators as est, linalg
from .harness import experiments
from .harness.config import config_from_dict
from .harness.report import read_mse_csv, write_mse_csv
from .scenario import identity_scenario, kronecker_scenario


class CheckFailed(AssertionError):
    pass


def _require(cond, msg="") -> None:
    # explicit raise: survives python -O
    if not cond:
        raise CheckFailed(msg)


def _small(seed: int = 0, beta: float = 0.1):
    return kronecker_scenario(2, 4, 2, 10.0, beta, r_t=0.3 + 0.1 * seed, r_r=0.6)


def check_mmse_oracle() -> str:
    scn = _small()
    y = linalg.complex_normal(linalg.substream(1, "y"), scn.dims.n)
    dense = scn.r_cov @ scn.pilot_tilde.conj().T @ np.linalg.inv(scn.d_cov) @ y
    got = est.mmse_apply(scn, y)
    err = np.linalg.norm(got - dense) / np.linalg.norm(dense)
    _require(err < 1e-9, f"relative error {err:.2e}")
    return f"rel err {err:.1e}"


def check_identity_closed_form() -> str:
    gamma = 10.0
    scn = identity_scenario(3, 5, gamma)
    m = scn.dims.m
    _require(abs(est.mmse_mse(scn) / m - 1 / (1 + gamma)) < 1e-12)
    _require(abs(est.mvu_variance(scn) / m - 1 / gamma) < 1e-12)
    return "1/(1+g) and 1/g"


def check_peach_convergence() -> str:
    scn = _small(beta=0.0)
    alpha = est.alpha_peach(scn)
    mmse = est.mmse_mse(scn)
    gaps = [est.peach_mse(scn, L, alpha) - mmse for L in (1, 2, 4, 8, 16, 32)]
    _require(all(g > 0 for g in gaps) and all(np.diff(gaps) < 0), gaps)
    _require(est.peach_mse(scn, 64, alpha) - mmse < 1e-6 * mmse)
    return f"gap(L=32) {gaps[-1]:.2e}"


def check_dominance() -> str:
    scn = _small()
    ap, aw = est.alpha_peach(scn), est.alpha_wpeach(scn)
    prev = np.inf
    for L in range(8):
        w = est.wpeach_mse(scn, est.wpeach_weights_lstsq(scn, L, aw))
        _require(w <= est.peach_mse(scn, L, ap) + 1e-10)
        _require(w <= prev + 1e-10)
        prev = w
    return "L = 0..7"


def check_window_consistency() -> str:
    scn = _small()
    alpha = est.alpha_wpeach(scn)
    rng = linalg.substream(2, "window")
    ys = scn.s_factor @ linalg.complex_normal(rng, (scn.dims.n, 30))
    state = adaptive.window_init(scn, 2, 10, alpha, ys[:, :10], rng=rng)
    for k in range(10, 30):
        state.update(ys[:, k])
    diff = np.max(np.abs(state._moment_sum / state.window_len - state.batch_moments()))
    _require(diff < 1e-8, diff)
    return f"max diff {diff:.1e}"


def check_determinism() -> str:
    cfg = config_from_dict({
        "dims": {"nt": 2, "nr": 4, "b": 2}, "gamma_db": [10.0], "beta": [0.1],
        "orders": [1, 3], "trials": 300,
    })
    a = experiments.run_order_sweep(cfg)
    cfg.threads = 4
    b = experiments.run_order_sweep(cfg)
    _require(a.same_values(b), "1 vs 4 threads differ")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "r.csv"
        write_mse_csv(a, path)
        _require(read_mse_csv(path).same_values(a), "CSV round trip differs")
    return f"{len(a.rows)} rows"


CHECKS: dict[str, Callable[[], str]] = {
    "identity closed form": check_identity_closed_form,
    "mmse vs dense inverse": check_mmse_oracle,
    "peach convergence": check_peach_convergence,
    "wpeach dominance": check_dominance,
    "window ring buffer": check_window_consistency,
    "determinism and csv": check_determinism,
}


def run_checks(echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        try:
            detail = check()
            echo(f"PASS  {name}: {detail}")
        except Exception as exc:  # report every failure, keep going
            ok = False
            echo(f"FAIL  {name}: {type(exc).__name__}: {exc}")
    return ok
