"""Sliding-window approximation of the W-PEACH weight system.

The exact system needs traces ``tr(G D^k G^H)``, an O(m^3) computation.
Since ``E[y y^H] = D``, each trace can be replaced by a window average of
quadratic forms, ``tr(G D^(k+1) G^H) ~ mean_t y_t^H G^H G D^k y_t``, at
O(n^2) per form. One new observation costs a power chain
``z_k = (alpha D)^k y`` for ``k = 0 .. 2L`` plus ``u_k = G z_k``; every
entry with the same ``i + j`` reuses the same ``q_k = Re(u_0^H u_k)``.

The leading entry of ``b`` has no factor of ``D`` and is estimated once,
from fixed Gaussian probe vectors.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from . import linalg
from .estimators import Operators, WeightSystem, WeightVector, hankel_system, solve_weight_system
from .scenario import Scenario


class WindowError(RuntimeError):
    """Window used before it was filled, or filled twice."""


def probe_trace_b1(scn: Scenario, probes, alpha: float) -> float:
    """``(alpha / T) sum_i ||R P^H v_i||^2``, unbiased for ``alpha tr(P R^2 P^H)``."""
    probes = np.asarray(probes, dtype=complex)
    if probes.ndim == 1:
        probes = probes[:, None]
    if probes.shape[1] == 0:
        raise ValueError("need at least one probe vector")
    g = scn.gain @ probes
    return float(alpha * np.mean(np.sum(np.abs(g) ** 2, axis=0)))


def sample_moments(ops: Operators, y, alpha: float, order: int) -> np.ndarray:
    """``alpha^k Re(y^H G^H G D^k y)`` for ``k = 0 .. 2L``.

    ``y`` may be an ``(n, k)`` block, giving a ``(2L + 1, k)`` result.
    The imaginary part of a single form is not zero unless ``G^H G`` and
    ``D`` commute, but it has zero mean, so only the real part is kept.
    """
    z = np.asarray(y, dtype=complex)
    u0 = ops.apply_gain(z)
    out = [np.sum(np.abs(u0) ** 2, axis=0)]
    for _ in range(2 * order):
        z = ops.apply_scaled(z, alpha)
        uk = ops.apply_gain(z)
        out.append(np.real(np.sum(u0.conj() * uk, axis=0)))
    return np.array(out)


class SlidingWindowState:
    """Running estimate of the W-PEACH normal equations over the last ``T`` observations.

    Single writer. ``push`` fills the window; once it holds ``T``
    observations, ``update`` slides it by one. Each stored observation keeps
    its scaled moments ``alpha^k q_k`` so that removal subtracts exactly what
    was added.
    """

    def __init__(self, scn: Scenario, order: int, window: int, alpha: float, probes):
        if order < 0:
            raise ValueError("order must be >= 0")
        if window < 1:
            raise ValueError("window length must be >= 1")
        self.scn = scn
        self.order = int(order)
        self.window_len = int(window)
        self.alpha = float(alpha)
        self.ops = Operators(scn)
        self.probes = np.asarray(probes, dtype=complex)
        self.b1 = probe_trace_b1(scn, self.probes, self.alpha)
        self.t = 0
        self.window: deque[tuple[np.ndarray, np.ndarray]] = deque()
        self._moment_sum = np.zeros(2 * self.order + 1)
        self._since_resync = 0
        self._injected: WeightSystem | None = None

    # -- per-sample work --------------------------------------------------------

    def sample_moments(self, y) -> np.ndarray:
        return sample_moments(self.ops, y, self.alpha, self.order)

    # -- window management ------------------------------------------------------

    @property
    def warm(self) -> bool:
        return len(self.window) == self.window_len

    def push(self, y) -> "SlidingWindowState":
        """Add a warm-up observation."""
        if self.warm:
            raise WindowError("window already full; use update()")
        y = np.asarray(y, dtype=complex)
        q = self.sample_moments(y)
        self.window.append((y, q))
        self._moment_sum += q
        self.t += 1
        return self

    def update(self, y_new) -> "SlidingWindowState":
        """Slide the window: add ``y_new`` and drop the oldest observation."""
        if not self.warm:
            raise WindowError(
                f"window holds {len(self.window)} of {self.window_len} observations"
            )
        y_new = np.asarray(y_new, dtype=complex)
        q_new = self.sample_moments(y_new)
        _, q_old = self.window.popleft()
        self.window.append((y_new, q_new))
        self._moment_sum += q_new - q_old
        self.t += 1
        self._since_resync += 1
        if self._since_resync >= self.window_len:
            self.resync()
        return self

    def resync(self) -> None:
        """Recompute the running sum from the stored per-sample moments."""
        self._moment_sum = np.sum([q for _, q in self.window], axis=0)
        self._since_resync = 0

    def batch_moments(self) -> np.ndarray:
        """Window average recomputed from the stored observations (reference path)."""
        ys = np.stack([y for y, _ in self.window], axis=1)
        return np.mean(sample_moments(Operators(self.scn), ys, self.alpha, self.order), axis=1)

    # -- weight system ----------------------------------------------------------

    def inject(self, system: WeightSystem) -> None:
        """Replace the sampled system with a given one (tests, baselines)."""
        self._injected = system

    def system(self) -> WeightSystem:
        if self._injected is not None:
            return self._injected
        if not self.warm:
            raise WindowError("window is not full")
        m = self._moment_sum / self.window_len
        scale = self.alpha ** 2
        b = np.empty(self.order + 1)
        b[0] = self.b1
        b[1:] = scale * m[: self.order]
        return hankel_system(scale * m, b, self.alpha, self.scn.trace_r)

    @property
    def a_tilde(self) -> np.ndarray:
        return self.system().a_mat

    @property
    def b_tilde(self) -> np.ndarray:
        return self.system().b_vec

    def weights(self) -> WeightVector:
        sys_ = self.system()
        return WeightVector(self.alpha, solve_weight_system(sys_.a_mat, sys_.b_vec))


def draw_probes(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return linalg.complex_normal(rng, (n, count))


def window_init(scn: Scenario, order: int, window: int, alpha: float, warmup,
                probes=None, rng: np.random.Generator | None = None) -> SlidingWindowState:
    """Fill a window from exactly ``window`` warm-up observations.

    ``warmup`` is a sequence of observation vectors or an ``(n, T)`` block.
    Without explicit ``probes``, ``window`` probe vectors are drawn from
    ``rng`` and kept fixed.
    """
    if isinstance(warmup, np.ndarray) and warmup.ndim == 2:
        if warmup.shape[0] != scn.dims.n:
            raise linalg.DimensionError(f"warm-up block must have {scn.dims.n} rows")
        cols = list(warmup.T)
    else:
        cols = list(warmup)
    if len(cols) != window:
        raise WindowError(f"need exactly {window} warm-up observations, got {len(cols)}")
    if probes is None:
        if rng is None:
            raise ValueError("pass probes or an rng to draw them")
        probes = draw_probes(scn.dims.n, window, rng)
    state = SlidingWindowState(scn, order, window, alpha, probes)
    for y in cols:
        state.push(y)
    return state


def window_update(state: SlidingWindowState, y_new) -> SlidingWindowState:
    return state.update(y_new)


def current_weights(state: SlidingWindowState) -> WeightVector:
    """``w_approx = A_tilde^{-1} b_tilde`` (an (L+1)-dimensional solve)."""
    return state.weights()
