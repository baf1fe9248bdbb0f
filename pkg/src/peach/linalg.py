"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Vectorization
is column-major everywhere, so that ``vec(A X B) = (B^T kron A) vec(X)``.
"""

from __future__ import annotations

import zlib

import numpy as np
import scipy.linalg as sla

#: Largest matrix dimension :func:`kron` will build.
MAX_DIM = 20_000

#: Eigenvalues below ``-PSD_TOL * lambda_max`` make a matrix indefinite.
PSD_TOL = 1e-10


class DimensionError(ValueError):
    """Shapes do not conform, or a product exceeds :data:`MAX_DIM`."""


class FactorizationError(np.linalg.LinAlgError):
    """A Cholesky or eigen-factorization could not be completed."""


class ConvergenceError(RuntimeError):
    """An iterative eigenvalue routine hit its iteration cap."""


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    return a


def kron(a, b, max_dim: int = MAX_DIM) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    a = as_matrix(a)
    b = as_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if max(rows, cols) > max_dim:
        raise DimensionError(
            f"kron result {rows}x{cols} exceeds the configured maximum {max_dim}"
        )
    return np.kron(a, b)


def vectorize(x) -> np.ndarray:
    """Stack the columns of ``x`` top to bottom, first column first."""
    return as_matrix(x).reshape(-1, order="F")


def unvectorize(v, rows: int, cols: int) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1 or v.size != rows * cols:
        raise DimensionError(f"cannot reshape {v.shape} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def is_hermitian(x, atol: float = 1e-12) -> bool:
    x = np.asarray(x)
    return x.ndim == 2 and x.shape[0] == x.shape[1] and np.allclose(
        x, x.conj().T, rtol=0.0, atol=atol
    )


def hermitian_part(x) -> np.ndarray:
    x = as_matrix(x)
    return 0.5 * (x + x.conj().T)


def _gershgorin(x: np.ndarray) -> tuple[float, float]:
    centre = np.real(np.diag(x))
    radius = np.sum(np.abs(x), axis=1) - np.abs(np.diag(x))
    return float(np.min(centre - radius)), float(np.max(centre + radius))


def _dominant_eigenvalue(x, shift, sign, tol, max_iter, rng):
    """Power iteration on ``sign * (x - shift I)``, which must be PSD."""
    n = x.shape[0]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = sign * (x @ v - shift * v)
        rho = float(np.real(np.vdot(v, w)))
        resid = np.linalg.norm(w - rho * v)
        lam = shift + sign * rho
        if resid <= tol * max(abs(lam), np.finfo(float).tiny):
            return lam
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return shift
        v = w / norm
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def extreme_eigenvalues(
    x, tol: float = 1e-10, method: str = "dense", max_iter: int = 20_000, seed: int = 0
) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a Hermitian matrix.

    Parameters
    ----------
    x : array_like
        Hermitian matrix.
    tol : float
        Relative accuracy. Only used by the power-iteration method; the
        dense method is accurate to machine precision.
    method : {"dense", "power"}
        ``"dense"`` runs a full Hermitian eigensolve. ``"power"`` runs two
        shifted power iterations started from the Gershgorin bounds.

    Returns
    -------
    (lambda_min, lambda_max)
    """
    x = as_matrix(x)
    if x.shape[0] != x.shape[1]:
        raise DimensionError("extreme_eigenvalues needs a square matrix")
    if method == "dense":
        lam = sla.eigvalsh(x, check_finite=True)
        return float(lam[0]), float(lam[-1])
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    lo, hi = _gershgorin(x)
    rng = np.random.default_rng(seed)
    lam_max = _dominant_eigenvalue(x, lo, 1.0, tol, max_iter, rng)
    lam_min = _dominant_eigenvalue(x, hi, -1.0, tol, max_iter, rng)
    return lam_min, lam_max


def cholesky(x) -> np.ndarray:
    """Lower Cholesky factor, raising :class:`FactorizationError` on failure."""
    try:
        return sla.cholesky(as_matrix(x), lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(str(exc)) from exc


def hermitian_solve(x, b) -> np.ndarray:
    """Solve ``x v = b`` for Hermitian positive-definite ``x``.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    x = as_matrix(x)
    try:
        factor = sla.cho_factor(x, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"matrix is not positive definite: {exc}") from exc
    return sla.cho_solve(factor, np.asarray(b, dtype=complex), check_finite=False)


def gaussian_factor(cov) -> np.ndarray:
    """Return ``F`` with ``F F^H = cov``.

    Cholesky is tried first. Semi-definite input falls back to an
    eigen-factorization with eigenvalues in ``[-PSD_TOL * lambda_max, 0)``
    clipped to zero.
    """
    cov = as_matrix(cov)
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return sla.cholesky(cov, lower=True, check_finite=True)
    except np.linalg.LinAlgError:
        pass
    lam, vec = sla.eigh(hermitian_part(cov))
    floor = -PSD_TOL * max(lam[-1], 0.0)
    if lam[0] < floor:
        raise FactorizationError(
            f"covariance is indefinite: lambda_min={lam[0]:.3e}, lambda_max={lam[-1]:.3e}"
        )
    return vec * np.sqrt(np.clip(lam, 0.0, None))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. CN(0, 1) entries, ``(x + iy) / sqrt(2)`` with ``x, y ~ N(0, 1)``."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def sample_gaussian(cov, rng: np.random.Generator, size: int | None = None,
                    factor: np.ndarray | None = None) -> np.ndarray:
    """Draw from CN(0, cov).

    Returns a vector, or a ``(dim, size)`` matrix of independent columns
    when ``size`` is given. A precomputed ``factor`` skips factorization.
    """
    f = gaussian_factor(cov) if factor is None else factor
    shape = (f.shape[1],) if size is None else (f.shape[1], size)
    return f @ complex_normal(rng, shape)


def role_tag(role: str) -> int:
    return zlib.crc32(role.encode("utf-8"))


def substream(seed: int, *keys: int | str) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``.

    String keys are hashed to integers, so a stream can be named by trial
    index and role, e.g. ``substream(seed, trial, "noise")``.
    """
    spawn_key = tuple(role_tag(k) if isinstance(k, str) else int(k) for k in keys)
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=spawn_key))
    )
