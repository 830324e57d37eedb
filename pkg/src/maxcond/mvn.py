"""Multivariate normal orthant-type probabilities P(X < b), X ~ N(mean, cov).

Dimension 1 is evaluated in closed form, dimension 2 by adaptive quadrature of
the conditional normal CDF, and dimensions 3..MAX_DIM by Genz's
separation-of-variables transform integrated with a randomly shifted
Richtmyer lattice.  The standard error is the spread of the shift means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from maxcond.errors import AccuracyError, CapacityError

MAX_DIM = 6

_PRIMES = np.array([2, 3, 5, 7, 11, 13, 17, 19, 23, 29], dtype=float)


@dataclass(frozen=True)
class MvnProblem:
    mean: np.ndarray
    cov: np.ndarray
    upper: np.ndarray
    rtol: float = 1e-3
    atol: float = 1e-9

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "upper", upper)
        d = mean.size
        if cov.shape != (d, d) or upper.size != d:
            raise ValueError("inconsistent MVN problem shapes")
        if d > MAX_DIM:
            raise CapacityError(f"MVN dimension {d} exceeds capacity {MAX_DIM}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        if d and np.linalg.eigvalsh(cov).min() < -1e-10 * max(1.0, np.trace(cov)):
            raise ValueError("covariance is not positive semi-definite")

    @property
    def dim(self) -> int:
        return self.mean.size


def _safe_cholesky(cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    scale = max(np.trace(cov) / max(d, 1), 1e-300)
    for jitter in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            return np.linalg.cholesky(cov + jitter * scale * np.eye(d))
        except np.linalg.LinAlgError:
            continue
    # semi-definite: build a pivot-free factor from the eigendecomposition
    w, v = np.linalg.eigh(cov)
    half = v * np.sqrt(np.clip(w, 0, None))
    q, r = np.linalg.qr(half.T)
    L = r.T
    signs = np.sign(np.diag(L))
    signs[signs == 0] = 1.0
    return L * signs


def _prioritize(b: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Variables with the smallest standardized limits first (deterministic, ties by index)."""
    sd = np.sqrt(np.clip(np.diag(cov), 0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, b / np.where(sd > 0, sd, 1.0), np.where(b >= 0, np.inf, -np.inf))
    return np.lexsort((np.arange(b.size), z))


def _cdf2(b: np.ndarray, cov: np.ndarray) -> float:
    s1 = np.sqrt(cov[0, 0])
    s2 = np.sqrt(cov[1, 1])
    if s1 == 0 or s2 == 0:
        p = 1.0
        for i, s in ((0, s1), (1, s2)):
            p *= float(ndtr(b[i] / s)) if s > 0 else float(b[i] > 0)
        return p
    rho = float(np.clip(cov[0, 1] / (s1 * s2), -1.0, 1.0))
    h, k = b[0] / s1, b[1] / s2
    if h == -np.inf or k == -np.inf:
        return 0.0
    if h == np.inf:
        return float(ndtr(k))
    if k == np.inf:
        return float(ndtr(h))
    if abs(rho) >= 1.0 - 1e-14:
        if rho > 0:
            return float(ndtr(min(h, k)))
        return float(max(ndtr(h) - ndtr(-k), 0.0))
    root = np.sqrt(1.0 - rho * rho)
    # integrate over the less likely variable for accuracy
    if h > k:
        h, k = k, h
    f = lambda u: np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi) * ndtr((k - rho * u) / root)
    lo = min(h - 1.0, -40.0)
    val, _ = integrate.quad(f, lo, h, epsabs=1e-15, epsrel=1e-12, limit=200, points=None)
    return float(min(max(val, 0.0), 1.0))


def _sov_integrand(w: np.ndarray, b: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Genz transform: w has shape (n, d-1) with entries in (0, 1)."""
    n = w.shape[0]
    d = b.size
    y = np.zeros((n, d))
    if L[0, 0] > 0:
        e = np.full(n, ndtr(b[0] / L[0, 0]))
    else:
        e = np.full(n, float(b[0] > 0))
    f = e.copy()
    for i in range(1, d):
        u = np.clip(w[:, i - 1] * e, 1e-300, 1 - 1e-16)
        y[:, i - 1] = ndtri(u)
        shift = y[:, :i] @ L[i, :i]
        if L[i, i] > 1e-300:
            e = ndtr((b[i] - shift) / L[i, i])
        else:
            e = (b[i] - shift > 0).astype(float)
        f *= e
    return f


def mvn_cdf(problem: MvnProblem, seed: int = 0, n_shifts: int = 12,
            n_start: int = 1024, n_max: int = 2 ** 17) -> tuple[float, float]:
    """Return ``(probability, standard_error)`` for P(X < upper).

    Raises AccuracyError when the QMC standard error cannot be brought below
    ``max(rtol * p, atol)`` with at most ``n_max`` lattice points per shift.
    """
    b = problem.upper - problem.mean
    cov = problem.cov
    d = problem.dim
    if d == 0:
        return 1.0, 0.0
    if np.any(b == -np.inf):
        return 0.0, 0.0
    finite = np.isfinite(b)
    if not finite.all():
        b = b[finite]
        cov = cov[np.ix_(finite, finite)]
        d = b.size
        if d == 0:
            return 1.0, 0.0
    if d == 1:
        s = np.sqrt(cov[0, 0])
        return (float(ndtr(b[0] / s)) if s > 0 else float(b[0] > 0)), 0.0
    order = _prioritize(b, cov)
    b = b[order]
    cov = cov[np.ix_(order, order)]
    if d == 2:
        return _cdf2(b, cov), 0.0

    L = _safe_cholesky(cov)
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(d,))))
    shifts = gen.random((n_shifts, d - 1))
    z = np.sqrt(_PRIMES[: d - 1]) % 1.0
    n = n_start
    while True:
        k = np.arange(1, n + 1)[:, None]
        base = (k * z) % 1.0
        means = np.empty(n_shifts)
        for m in range(n_shifts):
            x = (base + shifts[m]) % 1.0
            w = np.abs(2.0 * x - 1.0)  # tent periodization
            means[m] = _sov_integrand(w, b, L).mean()
        p = float(means.mean())
        se = float(means.std(ddof=1) / np.sqrt(n_shifts))
        target = max(problem.rtol * p, problem.atol)
        if se <= target:
            return p, se
        if n >= n_max:
            raise AccuracyError(se, target, p)
        n *= 2


def norm_cdf_dim(upper, cov, mean=None, rtol: float = 1e-3, atol: float = 1e-9,
                 seed: int = 0) -> tuple[float, float]:
    """Convenience wrapper building an MvnProblem."""
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if mean is None:
        mean = np.zeros_like(upper)
    return mvn_cdf(MvnProblem(mean, cov, upper, rtol=rtol, atol=atol), seed=seed)
