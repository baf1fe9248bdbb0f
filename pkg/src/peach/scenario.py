"""Statistical scenario: covariances, pilots and the pilot-based signal model.

The received training block is ``Y = H P + N`` with ``H`` of size
``nr x nt`` and ``P`` of size ``nt x b``. In vectorized form
``y = P_tilde vec(H) + vec(N)`` with ``P_tilde = P^T kron I_nr``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linalg

#: Default exponential-model coefficients (transmit, receive).
DEFAULT_R_T = 0.5
DEFAULT_R_R = 0.7


@dataclass(frozen=True)
class SystemDims:
    nt: int
    nr: int
    b: int

    def __post_init__(self):
        for name in ("nt", "nr", "b"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.b < self.nt:
            warnings.warn(
                f"pilot length b={self.b} < nt={self.nt}: the channel is not fully excited",
                stacklevel=3,
            )

    @property
    def m(self) -> int:
        """Channel dimension ``nt * nr``."""
        return self.nt * self.nr

    @property
    def n(self) -> int:
        """Observation dimension ``b * nr``."""
        return self.b * self.nr


@dataclass(frozen=True, eq=False)
class InterfererSpec:
    """One pilot-contaminating cell, with covariance ``beta * (sigma_t kron sigma_r)``."""

    beta: float
    sigma_t: np.ndarray
    sigma_r: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        for name in ("sigma_t", "sigma_r"):
            mat = linalg.as_matrix(getattr(self, name))
            if not linalg.is_hermitian(mat):
                raise ValueError(f"{name} is not Hermitian")
            if not np.allclose(np.diag(mat), 1.0, atol=1e-12):
                raise ValueError(f"{name} must have unit diagonal")
            object.__setattr__(self, name, mat)

    @property
    def covariance(self) -> np.ndarray:
        return linalg.kron(self.sigma_t, self.sigma_r)


@dataclass(frozen=True)
class SnrSpec:
    """Normalized pilot SNR ``gamma = p_t / noise_var``."""

    gamma: float
    p_t: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @classmethod
    def from_db(cls, gamma_db: float, noise_var: float = 1.0) -> "SnrSpec":
        gamma = 10.0 ** (gamma_db / 10.0)
        return cls(gamma=gamma, p_t=gamma * noise_var)


def exponential_correlation(dim: int, r: complex) -> np.ndarray:
    """Exponential correlation matrix with entries ``r**(j - i)`` above the diagonal."""
    if abs(r) >= 1:
        raise ValueError(f"|r| must be < 1, got {abs(r)}")
    idx = np.arange(dim)
    lag = idx[None, :] - idx[:, None]
    upper = np.power(complex(r), np.abs(lag))
    return np.where(lag >= 0, upper, np.conj(upper))


def kronecker_covariance(rt, rr) -> np.ndarray:
    """Kronecker channel covariance ``rt kron rr``."""
    return linalg.kron(rt, rr)


def build_pilot(dims: SystemDims, p_t: float, kind: str = "scaled-identity",
                custom=None) -> np.ndarray:
    """Pilot matrix with average power ``tr(P P^H) / nt = p_t``.

    ``kind="custom"`` rescales the supplied ``nt x b`` matrix to that power.
    """
    if kind == "scaled-identity":
        if dims.b != dims.nt:
            raise ValueError("scaled-identity pilot requires b == nt")
        return np.sqrt(p_t) * np.eye(dims.nt, dtype=complex)
    if kind != "custom":
        raise ValueError(f"unknown pilot kind {kind!r}")
    pilot = linalg.as_matrix(custom)
    if pilot.shape != (dims.nt, dims.b):
        raise linalg.DimensionError(f"pilot must be {dims.nt}x{dims.b}, got {pilot.shape}")
    power = np.real(np.trace(pilot @ pilot.conj().T)) / dims.nt
    if power <= 0:
        raise ValueError("custom pilot is zero")
    return pilot * np.sqrt(p_t / power)


def pilot_tilde(dims: SystemDims, pilot) -> np.ndarray:
    return linalg.kron(linalg.as_matrix(pilot).T, np.eye(dims.nr))


def disturbance_covariance(dims: SystemDims, noise_var: float,
                           interferers: Sequence[InterfererSpec],
                           p_tilde) -> np.ndarray:
    """``S = sum_i beta_i P_tilde Sigma_i P_tilde^H + noise_var I``."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    s = noise_var * np.eye(dims.n, dtype=complex)
    for spec in interferers:
        if spec.beta == 0.0:
            continue
        s += spec.beta * (p_tilde @ spec.covariance @ p_tilde.conj().T)
    return linalg.hermitian_part(s)


@dataclass(frozen=True, eq=False)
class Scenario:
    dims: SystemDims
    r_cov: np.ndarray
    pilot: np.ndarray
    pilot_tilde: np.ndarray
    noise_var: float
    interferers: tuple[InterfererSpec, ...]
    s_cov: np.ndarray
    d_cov: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, dims: SystemDims, r_cov, pilot, noise_var: float = 1.0,
              interferers: Sequence[InterfererSpec] = (), meta: dict | None = None
              ) -> "Scenario":
        r_cov = linalg.as_matrix(r_cov)
        if r_cov.shape != (dims.m, dims.m):
            raise linalg.DimensionError(f"R must be {dims.m}x{dims.m}, got {r_cov.shape}")
        if not linalg.is_hermitian(r_cov):
            raise ValueError("R is not Hermitian")
        pilot = linalg.as_matrix(pilot)
        pt = pilot_tilde(dims, pilot)
        interferers = tuple(interferers)
        s_cov = disturbance_covariance(dims, noise_var, interferers, pt)
        d_cov = linalg.hermitian_part(pt @ r_cov @ pt.conj().T + s_cov)
        return cls(dims, r_cov, pilot, pt, float(noise_var), interferers, s_cov, d_cov,
                   dict(meta or {}))

    @property
    def trace_r(self) -> float:
        return float(np.real(np.trace(self.r_cov)))

    @cached_property
    def gain(self) -> np.ndarray:
        """``R P_tilde^H``, the ``m x n`` matrix mapping whitened data to channel space."""
        return self.r_cov @ self.pilot_tilde.conj().T

    @cached_property
    def r_factor(self) -> np.ndarray:
        return linalg.gaussian_factor(self.r_cov)

    @cached_property
    def s_factor(self) -> np.ndarray:
        return linalg.gaussian_factor(self.s_cov)

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues of ``D`` and the diagonal of ``U^H (P R^2 P^H) U`` in its eigenbasis.

        Every analytic MSE expression of a polynomial estimator reduces to a
        weighted sum over these two vectors.
        """
        lam, vec = np.linalg.eigh(self.d_cov)
        proj = self.gain @ vec
        weight = np.einsum("ij,ij->j", proj.conj(), proj).real
        return lam, weight


def sample_channel_vec(scn: Scenario, rng: np.random.Generator,
                       size: int | None = None) -> np.ndarray:
    return linalg.sample_gaussian(scn.r_cov, rng, size, factor=scn.r_factor)


def sample_channel(scn: Scenario, rng: np.random.Generator) -> np.ndarray:
    """One ``nr x nt`` channel with ``vec(H) ~ CN(0, R)``."""
    return linalg.unvectorize(sample_channel_vec(scn, rng), scn.dims.nr, scn.dims.nt)


def sample_observation(scn: Scenario, h, rng: np.random.Generator) -> np.ndarray:
    """``y = P_tilde vec(H) + n`` with ``n ~ CN(0, S)``.

    ``h`` is either an ``nr x nt`` channel or a ``(m, k)`` batch of
    vectorized channels; in the latter case ``k`` observations are returned.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape == (scn.dims.nr, scn.dims.nt):
        hv = linalg.vectorize(h)
        noise = linalg.sample_gaussian(scn.s_cov, rng, factor=scn.s_factor)
    else:
        hv = h
        size = None if h.ndim == 1 else h.shape[1]
        noise = linalg.sample_gaussian(scn.s_cov, rng, size, factor=scn.s_factor)
    return scn.pilot_tilde @ hv + noise


def normalized_sinr(gamma: float, k: int, beta: float) -> float:
    """``gamma / (1 + k beta gamma)``."""
    if gamma <= 0 or k < 0 or beta < 0:
        raise ValueError("need gamma > 0, k >= 0, beta >= 0")
    return gamma / (1.0 + k * beta * gamma)


def kronecker_scenario(nt: int, nr: int, b: int, gamma_db: float, beta: float = 0.0,
                       r_t: complex = DEFAULT_R_T, r_r: complex = DEFAULT_R_R,
                       interferer_r: Sequence[tuple[complex, complex]] | None = None,
                       n_interferers: int = 2, noise_var: float = 1.0) -> Scenario:
    """Exponential-Kronecker scenario with a scaled-identity (or scaled-DFT) pilot.

    Interferers reuse the desired pilot. ``interferer_r`` gives one
    ``(r_t, r_r)`` pair per interfering cell; by default each of the
    ``n_interferers`` cells uses the desired channel's coefficients.
    With ``beta == 0`` the interferers are dropped (noise-limited case).
    """
    dims = SystemDims(nt, nr, b)
    snr = SnrSpec.from_db(gamma_db, noise_var)
    r_cov = kronecker_covariance(exponential_correlation(nt, r_t),
                                 exponential_correlation(nr, r_r))
    if b == nt:
        pilot = build_pilot(dims, snr.p_t)
    else:
        # orthogonal rows when b > nt; any nt x b pilot with the right power works
        dft = np.exp(-2j * np.pi * np.outer(np.arange(nt), np.arange(b)) / b)
        pilot = build_pilot(dims, snr.p_t, kind="custom", custom=dft)
    if interferer_r is None:
        interferer_r = [(r_t, r_r)] * n_interferers
    interferers = []
    if beta > 0:
        interferers = [
            InterfererSpec(beta, exponential_correlation(nt, rt), exponential_correlation(nr, rr))
            for rt, rr in interferer_r
        ]
    meta = {"gamma_db": gamma_db, "gamma": snr.gamma, "beta": beta,
            "k": len(interferer_r), "r_t": r_t, "r_r": r_r}
    return Scenario.build(dims, r_cov, pilot, noise_var, interferers, meta)


def identity_scenario(nt: int, nr: int, gamma: float, noise_var: float = 1.0) -> Scenario:
    """``R = I``, ``P = sqrt(p_t) I``, ``S = noise_var I``: every estimator has a closed form."""
    dims = SystemDims(nt, nr, nt)
    p_t = gamma * noise_var
    return Scenario.build(dims, np.eye(dims.m, dtype=complex), build_pilot(dims, p_t),
                          noise_var, (), {"gamma": gamma, "beta": 0.0, "k": 0})
