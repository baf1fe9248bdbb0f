"""Channel estimators and their analytic mean square errors.

Four estimators share one linear structure, ``vec(H_hat) = G F(D) y`` with
``G = R P_tilde^H`` and ``D = P_tilde R P_tilde^H + S``:

* MMSE: ``F(D) = D^{-1}`` (Cholesky solve),
* MVU: no prior; weighted least squares through ``S^{-1}``,
* PEACH: ``F(D) = alpha sum_{l<=L} (I - alpha D)^l``, a truncated scaled
  Neumann series,
* W-PEACH: ``F(D) = sum_{l<=L} w_l alpha^{l+1} D^l`` with MSE-optimal
  weights.

The polynomial estimators never form a matrix power: they only apply ``D``
to vectors, ``L`` times per estimate.

Analytic errors of the polynomial estimators use the eigen-decomposition
``D = U diag(lam) U^H``. With ``c_n = [U^H P_tilde R^2 P_tilde^H U]_nn``
the MSE of any ``F = f(D)`` is

    mmse + sum_n c_n lam_n (f(lam_n) - 1 / lam_n)^2

which is a sum of non-negative terms, so no cancellation occurs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import linalg
from .scenario import Scenario

#: Relative eigenvalue cut-off when solving the (equilibrated) weight system.
WEIGHT_RCOND = 1e-13


class DivergenceWarning(RuntimeWarning):
    """alpha violates ``0 < alpha < 2 / lambda_max(D)``; the series diverges as L grows."""


class SingularSystemError(np.linalg.LinAlgError):
    pass


# -- instrumented operators ---------------------------------------------------


class Operators:
    """Counted applications of ``x -> D x`` and ``x -> R P_tilde^H x``.

    A call on an ``(n, k)`` block counts once: the counters track the
    per-estimate operation count, whatever the batch size.
    """

    def __init__(self, scn: Scenario):
        self.d = scn.d_cov
        self.g = scn.gain
        self.d_applications = 0
        self.gain_applications = 0
        self._cache: dict[tuple[str, float], np.ndarray] = {}

    def apply_d(self, x: np.ndarray) -> np.ndarray:
        self.d_applications += 1
        return self.d @ x

    def _matrix(self, kind: str, alpha: float) -> np.ndarray:
        key = (kind, alpha)
        if key not in self._cache:
            if kind == "shifted":
                mat = -alpha * self.d
                mat[np.diag_indices_from(mat)] += 1.0
            else:
                mat = alpha * self.d
            self._cache[key] = mat
        return self._cache[key]

    def apply_shifted(self, x: np.ndarray, alpha: float) -> np.ndarray:
        """``(I - alpha D) x``; counts as one application of ``D``.

        The shifted matrix is formed once per ``alpha`` (O(n^2)), which
        saves two vector operations per step of the recursion.
        """
        self.d_applications += 1
        return self._matrix("shifted", alpha) @ x

    def apply_scaled(self, x: np.ndarray, alpha: float) -> np.ndarray:
        """``alpha D x``; counts as one application of ``D``."""
        self.d_applications += 1
        return self._matrix("scaled", alpha) @ x

    def apply_gain(self, x: np.ndarray) -> np.ndarray:
        self.gain_applications += 1
        return self.g @ x

    @property
    def matvecs(self) -> int:
        return self.d_applications + self.gain_applications

    def reset(self) -> None:
        self.d_applications = 0
        self.gain_applications = 0


# -- value types ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Polynomial coefficients ``w_0 .. w_L`` and the scale ``alpha``."""

    alpha: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise ValueError("need at least one weight")
        if not np.all(np.isfinite(w)) or not math.isfinite(self.alpha):
            raise ValueError("weights and alpha must be finite")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        object.__setattr__(self, "weights", w)

    @property
    def order(self) -> int:
        return self.weights.size - 1

    def coefficients(self) -> np.ndarray:
        """Monomial coefficients ``w_l alpha^(l+1)`` of ``F(lam)``."""
        return self.weights * self.alpha ** np.arange(1, self.order + 2)


@dataclass(frozen=True, eq=False)
class WeightSystem:
    """Normal equations ``A w = b`` of the W-PEACH MSE, plus ``tr(R)``."""

    a_mat: np.ndarray
    b_vec: np.ndarray
    alpha: float
    trace_r: float

    @property
    def order(self) -> int:
        return self.b_vec.size - 1

    def mse(self, w) -> float:
        """``tr(R) + w^T A w - 2 b^T w`` for real ``w``."""
        w = np.asarray(w, dtype=float)
        return float(self.trace_r + w @ self.a_mat @ w - 2.0 * self.b_vec @ w)


# -- exact estimators -----------------------------------------------------------


def _as_obs(scn: Scenario, y) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    if y.shape[0] != scn.dims.n:
        raise linalg.DimensionError(f"observation has {y.shape[0]} rows, expected {scn.dims.n}")
    return y


def _as_channel(scn: Scenario, hv: np.ndarray) -> np.ndarray:
    return linalg.unvectorize(hv, scn.dims.nr, scn.dims.nt)


def mmse_apply(scn: Scenario, y, factor=None) -> np.ndarray:
    """``R P^H D^{-1} y`` on a vector or on the columns of a block."""
    y = _as_obs(scn, y)
    if factor is None:
        try:
            factor = sla.cho_factor(scn.d_cov, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise linalg.FactorizationError(str(exc)) from exc
    return scn.gain @ sla.cho_solve(factor, y, check_finite=False)


def mmse_estimate(scn: Scenario, y) -> np.ndarray:
    return _as_channel(scn, mmse_apply(scn, y))


def mmse_mse(scn: Scenario) -> float:
    """``tr(R) - tr(R P^H D^{-1} P R)``.

    Equal to ``tr((R^-1 + P^H S^-1 P)^-1)`` when R is invertible, but valid
    for singular R as well.
    """
    x = linalg.hermitian_solve(scn.d_cov, scn.gain.conj().T)
    return float(scn.trace_r - np.real(np.trace(scn.gain @ x)))


class _MvuFactors:
    def __init__(self, scn: Scenario):
        try:
            self.s = sla.cho_factor(scn.s_cov, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise linalg.FactorizationError(f"S is not positive definite: {exc}") from exc
        pt = scn.pilot_tilde
        self.whitened = sla.cho_solve(self.s, pt, check_finite=False)  # S^-1 P
        fisher = linalg.hermitian_part(pt.conj().T @ self.whitened)
        try:
            self.fisher = sla.cho_factor(fisher, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                "P^H S^-1 P is rank deficient (needs b >= nt and a full-rank pilot)"
            ) from exc
        diag = np.real(np.diag(self.fisher[0]))
        if diag.min() <= 1e-12 * diag.max():
            raise SingularSystemError("P^H S^-1 P is numerically rank deficient")


def mvu_apply(scn: Scenario, y, factors: _MvuFactors | None = None) -> np.ndarray:
    y = _as_obs(scn, y)
    f = factors or _MvuFactors(scn)
    return sla.cho_solve(f.fisher, f.whitened.conj().T @ y, check_finite=False)


def mvu_estimate(scn: Scenario, y) -> np.ndarray:
    return _as_channel(scn, mvu_apply(scn, y))


def mvu_variance(scn: Scenario) -> float:
    """``tr((P^H S^-1 P)^-1)``."""
    f = _MvuFactors(scn)
    inv = sla.cho_solve(f.fisher, np.eye(scn.dims.m), check_finite=False)
    return float(np.real(np.trace(inv)))


# -- alpha -----------------------------------------------------------------------


def alpha_peach(scn: Scenario, rule: str = "extreme-eig") -> float:
    """Scaling of the Neumann series.

    ``"extreme-eig"`` gives ``2 / (lam_max + lam_min)``, which centres the
    spectrum of ``I - alpha D`` on the origin. ``"trace"`` gives the cheap,
    always-admissible ``2 / tr(D)``.
    """
    if rule == "extreme-eig":
        lo, hi = linalg.extreme_eigenvalues(scn.d_cov)
        return 2.0 / (hi + lo)
    if rule == "trace":
        return 2.0 / float(np.real(np.trace(scn.d_cov)))
    raise ValueError(f"unknown alpha rule {rule!r}")


def alpha_wpeach(scn: Scenario) -> float:
    """``1 / lam_max(D)``: keeps ``(alpha D)^l`` bounded as ``l`` grows."""
    return 1.0 / linalg.extreme_eigenvalues(scn.d_cov)[1]


def _check_alpha(scn: Scenario, alpha: float) -> None:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    d = scn.d_cov
    # Gershgorin bound first: O(n^2), and conclusive in the usual case
    radius = np.sum(np.abs(d), axis=1)
    if alpha * float(np.max(radius)) < 2.0:
        return
    lam_max = linalg.extreme_eigenvalues(d)[1]
    if alpha * lam_max >= 2.0:
        warnings.warn(
            f"alpha={alpha:.4g} >= 2/lambda_max={2.0 / lam_max:.4g}; "
            "the expansion diverges as L grows",
            DivergenceWarning,
            stacklevel=3,
        )


# -- PEACH -----------------------------------------------------------------------


def peach_partial_sums(ops: Operators, y: np.ndarray, alpha: float, max_order: int):
    """Yield ``sum_{l<=L} (I - alpha D)^l y`` for ``L = 0 .. max_order``.

    Uses ``s_{L+1} = y + (I - alpha D) s_L``: one application of ``D`` per order.
    """
    s = y
    yield s
    for _ in range(max_order):
        s = ops.apply_shifted(s, alpha)
        s += y
        yield s


def peach_apply(scn: Scenario, y, order: int, alpha: float,
                ops: Operators | None = None) -> np.ndarray:
    if order < 0:
        raise ValueError("order must be >= 0")
    y = _as_obs(scn, y)
    ops = ops or Operators(scn)
    for s in peach_partial_sums(ops, y, alpha, order):
        pass
    return ops.apply_gain(alpha * s)


def peach_estimate(scn: Scenario, y, order: int, alpha: float,
                   ops: Operators | None = None) -> np.ndarray:
    _check_alpha(scn, alpha)
    return _as_channel(scn, peach_apply(scn, y, order, alpha, ops))


def peach_gap(scn: Scenario, order: int, alpha: float) -> float:
    """Excess MSE of PEACH over MMSE.

    The PEACH filter is ``(1 - (1 - alpha lam)^(L+1)) / lam`` on each
    eigenvalue, so the excess is ``sum_n c_n (1 - alpha lam_n)^(2L+2) / lam_n``.
    """
    lam, c = scn.spectrum
    return float(np.sum(c * (1.0 - alpha * lam) ** (2 * order + 2) / lam))


def _spectral_mmse(scn: Scenario) -> float:
    lam, c = scn.spectrum
    return float(scn.trace_r - np.sum(c / lam))


def peach_mse(scn: Scenario, order: int, alpha: float) -> float:
    """MSE of the order-``L`` PEACH estimator.

    Equals ``tr(R + G A_L D A_L^H G^H - 2 G A_L P R)`` with
    ``A_L = alpha sum_l (I - alpha D)^l``, evaluated in the eigenbasis of D.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    if alpha * scn.spectrum[0][-1] >= 2.0:
        warnings.warn("alpha outside the convergence region", DivergenceWarning, stacklevel=2)
    return _spectral_mmse(scn) + peach_gap(scn, order, alpha)


def peach_weights(order: int, alpha: float) -> WeightVector:
    """PEACH written as a W-PEACH weight vector.

    Expanding ``alpha sum_{l<=L} (I - alpha D)^l`` binomially and collecting
    powers of ``alpha D`` gives ``w_k = (-1)^k C(L+1, k+1)``.
    """
    w = [(-1) ** k * math.comb(order + 1, k + 1) for k in range(order + 1)]
    return WeightVector(alpha, np.array(w, dtype=float))


# -- W-PEACH ---------------------------------------------------------------------


def _power_traces(scn: Scenario, alpha: float, max_power: int) -> np.ndarray:
    """``t_k = alpha^(k+1) tr(G D^k G^H)`` for ``k = 0 .. max_power``.

    Dense reference path, O(L m^2 n). Only ``W_j = (alpha D)^j G^H`` for
    ``j <= ceil(max_power / 2)`` are formed; even and odd traces come from
    ``tr(W_j^H W_j)`` and ``tr(W_j^H (alpha D) W_j)``.
    """
    w = [scn.gain.conj().T]
    for _ in range((max_power + 1) // 2):
        w.append(alpha * (scn.d_cov @ w[-1]))
    t = np.empty(max_power + 1)
    for k in range(max_power + 1):
        j = k // 2
        tr = np.vdot(w[j], w[k - j])  # sum(conj(W_j) * W_{k-j}) = tr(W_j^H W_{k-j})
        if abs(tr.imag) > 1e-10 * max(1.0, abs(tr.real)):
            raise ArithmeticError(f"trace {k} has imaginary residue {tr.imag:.3e}")
        t[k] = alpha * tr.real
    return t


def hankel_system(moments: np.ndarray, b_vec: np.ndarray, alpha: float,
                  trace_r: float) -> WeightSystem:
    """``A[i, j] = moments[i + j]`` (0-based), symmetrized."""
    size = b_vec.size
    idx = np.add.outer(np.arange(size), np.arange(size))
    a = np.asarray(moments)[idx]
    return WeightSystem(0.5 * (a + a.T), np.asarray(b_vec, dtype=float), alpha, trace_r)


def wpeach_weight_system(scn: Scenario, order: int, alpha: float) -> WeightSystem:
    """Exact normal equations for the MSE-optimal W-PEACH weights.

    With 1-based ``i, j``: ``A_ij = alpha^(i+j) tr(G D^(i+j-1) G^H)`` and
    ``b_i = alpha^i tr(G D^(i-1) G^H)``, i.e. ``A_ij = t_(i+j-1)`` and
    ``b_i = t_(i-1)`` in terms of :func:`_power_traces`.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    t = _power_traces(scn, alpha, 2 * order + 1)
    return hankel_system(t[1:], t[: order + 1], alpha, scn.trace_r)


def solve_weight_system(a_mat: np.ndarray, b_vec: np.ndarray,
                        rcond: float = WEIGHT_RCOND) -> np.ndarray:
    """Solve ``A w = b`` for symmetric PSD ``A``.

    ``A`` is a Hankel moment matrix and badly conditioned for large orders,
    so it is equilibrated to unit diagonal and solved through its
    eigen-decomposition. Eigenvalues below ``rcond`` times the largest are
    dropped, which returns the minimum-norm minimizer when ``A`` is
    rank-deficient (e.g. ``D`` proportional to the identity).
    """
    a = np.asarray(a_mat, dtype=float)
    b = np.asarray(b_vec, dtype=float)
    diag = np.diag(a)
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        raise SingularSystemError("weight system is not finite")
    if np.any(diag <= 0):
        raise SingularSystemError("weight system has a non-positive diagonal entry")
    scale = 1.0 / np.sqrt(diag)
    lam, vec = np.linalg.eigh(scale[:, None] * a * scale[None, :])
    keep = lam > rcond * lam[-1]
    if lam[-1] <= 0 or not np.any(keep):
        raise SingularSystemError("weight system is singular")
    proj = vec[:, keep].T @ (scale * b)
    return scale * (vec[:, keep] @ (proj / lam[keep]))


def wpeach_weights_optimal(system: WeightSystem) -> WeightVector:
    """``w_opt = A^{-1} b``."""
    return WeightVector(system.alpha, solve_weight_system(system.a_mat, system.b_vec))


def wpeach_weights_lstsq(scn: Scenario, order: int, alpha: float) -> WeightVector:
    """Optimal weights from the spectral least-squares form of the MSE.

    Minimizes ``sum_n c_n lam_n (sum_l w_l alpha^(l+1) lam_n^l - 1/lam_n)^2``
    by QR, i.e. without squaring the condition number as the normal
    equations do. Agrees with :func:`wpeach_weights_optimal` where that is
    well conditioned.
    """
    lam, c = scn.spectrum
    sqrt_w = np.sqrt(c * lam)
    basis = (alpha * lam)[:, None] ** np.arange(order + 1)[None, :] * alpha
    col_scale = np.linalg.norm(sqrt_w[:, None] * basis, axis=0)
    col_scale[col_scale == 0] = 1.0
    design = sqrt_w[:, None] * basis / col_scale
    sol, *_ = np.linalg.lstsq(design, sqrt_w / lam, rcond=None)
    return WeightVector(alpha, sol / col_scale)


def wpeach_apply(scn: Scenario, y, wv: WeightVector,
                 ops: Operators | None = None) -> np.ndarray:
    """``G sum_l w_l z_l`` with ``z_0 = alpha y``, ``z_{l+1} = alpha D z_l``."""
    y = _as_obs(scn, y)
    ops = ops or Operators(scn)
    z = wv.alpha * y
    acc = wv.weights[0] * z
    for w in wv.weights[1:]:
        z = ops.apply_scaled(z, wv.alpha)
        acc += w * z
    return ops.apply_gain(acc)


def wpeach_estimate(scn: Scenario, y, wv: WeightVector,
                    ops: Operators | None = None) -> np.ndarray:
    return _as_channel(scn, wpeach_apply(scn, y, wv, ops))


def wpeach_gap(scn: Scenario, wv: WeightVector) -> float:
    lam, c = scn.spectrum
    f = np.polynomial.polynomial.polyval(lam, wv.coefficients())
    return float(np.sum(c * lam * (f - 1.0 / lam) ** 2))


def wpeach_mse(scn: Scenario, wv: WeightVector) -> float:
    """MSE of W-PEACH with weights ``wv``.

    Same value as ``tr(R) + w^T A w - 2 b^T w``, evaluated in the
    eigenbasis of D where it is a sum of non-negative terms.
    """
    return _spectral_mmse(scn) + wpeach_gap(scn, wv)


# -- estimator objects used by the harness -------------------------------------


class Estimator:
    """Linear channel estimator with precomputed state.

    ``apply`` maps observations (a vector or an ``(n, k)`` block) to
    vectorized channel estimates; ``ops`` counts operator applications.
    """

    name = "estimator"
    order: int | None = None

    def __init__(self, scn: Scenario):
        self.scn = scn
        self.ops = Operators(scn)

    def apply(self, y, ops: Operators | None = None) -> np.ndarray:
        """Estimate; pass ``ops`` to count into a caller-owned (e.g. per-thread) counter."""
        raise NotImplementedError

    def estimate(self, y) -> np.ndarray:
        return _as_channel(self.scn, self.apply(y))

    def mse(self) -> float:
        raise NotImplementedError


class MMSEEstimator(Estimator):
    name = "mmse"

    def __init__(self, scn: Scenario):
        super().__init__(scn)
        self._factor = sla.cho_factor(scn.d_cov, lower=True, check_finite=False)

    def apply(self, y, ops=None):
        y = _as_obs(self.scn, y)
        ops = ops or self.ops
        return ops.apply_gain(sla.cho_solve(self._factor, y, check_finite=False))

    def mse(self):
        return mmse_mse(self.scn)


class MVUEstimator(Estimator):
    name = "mvu"

    def __init__(self, scn: Scenario):
        super().__init__(scn)
        self._factors = _MvuFactors(scn)

    def apply(self, y, ops=None):
        return mvu_apply(self.scn, y, self._factors)

    def mse(self):
        return mvu_variance(self.scn)


class PEACHEstimator(Estimator):
    name = "peach"

    def __init__(self, scn: Scenario, order: int, alpha: float | None = None,
                 alpha_rule: str = "extreme-eig"):
        super().__init__(scn)
        self.order = int(order)
        self.alpha = alpha_peach(scn, alpha_rule) if alpha is None else float(alpha)
        _check_alpha(scn, self.alpha)

    def apply(self, y, ops=None):
        return peach_apply(self.scn, y, self.order, self.alpha, ops or self.ops)

    def mse(self):
        return peach_mse(self.scn, self.order, self.alpha)


class WPEACHEstimator(Estimator):
    name = "wpeach"

    def __init__(self, scn: Scenario, weights: WeightVector, name: str | None = None):
        super().__init__(scn)
        self.weights = weights
        self.order = weights.order
        if name is not None:
            self.name = name

    @classmethod
    def optimal(cls, scn: Scenario, order: int, alpha: float | None = None
                ) -> "WPEACHEstimator":
        """MSE-optimal weights, solved in least-squares form for stability."""
        alpha = alpha_wpeach(scn) if alpha is None else alpha
        return cls(scn, wpeach_weights_lstsq(scn, order, alpha))

    def apply(self, y, ops=None):
        return wpeach_apply(self.scn, y, self.weights, ops or self.ops)

    def mse(self):
        return wpeach_mse(self.scn, self.weights)
