"""Exponent-measure models on a finite site grid.

A model describes the exponent measure ``mu`` of a max-i.d. field with vertex
function 0 through

* tail functions ``mu({f : f(s) not< x})`` (``joint_tail``),
* a spectral representation used for exact series simulation,
* block kernels: for a block of conditioning sites ``B`` and values ``y_B``,
  the density of ``mu_{t_B}`` at ``y_B`` and the normalized conditional
  measure ``P_{t_B}(y_B, .)`` (probabilities of box constraints and samples).

Three models are shipped: max-linear (discrete spectral measure), moving
maxima with a compactly supported kernel, and the log-Gaussian
(Brown-Resnick type) model whose margins have Lebesgue densities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr
from scipy.stats import multivariate_normal

from maxcond.errors import CapacityError, ModelError
from maxcond.grid import Site, SiteVector, site_ids
from maxcond.mvn import MAX_DIM, MvnProblem, mvn_cdf

DISCRETE = "discrete-spectral"
REGULAR = "regular-density"
MOVING_MAX = "bounded-moving-max"

MAX_DENSITY_DIM = 6
PATTERN_RTOL = 1e-9


def _merge_thresholds(ids, x):
    """Collapse repeated sites, keeping the smallest threshold."""
    ids = np.asarray(ids, dtype=int).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if ids.size != x.size:
        raise ValueError("sites and thresholds differ in length")
    uniq = np.unique(ids)
    if uniq.size == ids.size:
        return ids, x
    out = np.array([x[ids == u].min() for u in uniq])
    return uniq, out


class BlockKernel:
    """Conditional measure ``P_{t_B}(y_B, df)`` for one block of sites.

    ``log_density`` is the log density of ``mu_{t_B}`` at ``y_B`` with respect
    to a reference measure of dimension ``ref_dim``.
    """

    ids: np.ndarray
    y: np.ndarray
    ref_dim: int
    log_density: float

    def prob(self, ids, thresholds, seed: int = 0) -> tuple[float, float]:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def _split(self, ids, thresholds):
        """Merge constraints; return (block indicator, free ids, free thresholds)."""
        ids, thr = _merge_thresholds(ids, thresholds)
        inside = np.isin(ids, self.ids)
        ok = True
        for i, th in zip(ids[inside], thr[inside]):
            if not self.y[np.flatnonzero(self.ids == i)[0]] < th:
                ok = False
        keep = ~inside & np.isfinite(thr)
        return ok, ids[keep], thr[keep]


class SpectralModel:
    """Base class; see module docstring for the capability contract."""

    kind: str = ""
    grid: SiteVector
    simple: bool = False
    spectral_bound: float | None = None
    # bound of the functions returned by ``normalized_spectral``
    series_bound: float | None = None

    @property
    def m(self) -> int:
        return len(self.grid)

    def _id(self, t) -> int:
        if isinstance(t, Site):
            return t.id
        return int(t)

    def marginal_tail(self, t, x: float) -> float:
        return self.joint_tail([self._id(t)], [x])

    def joint_tail(self, s, x) -> float:
        ids = site_ids(self.grid, s)
        x = np.asarray(x, dtype=float).reshape(-1)
        if np.any(x <= 0):
            raise ValueError("thresholds must be positive")
        ids, x = _merge_thresholds(ids, x)
        finite = np.isfinite(x)
        if not finite.any():
            return 0.0
        return float(self._joint_tail(ids[finite], x[finite]))

    def _joint_tail(self, ids: np.ndarray, x: np.ndarray) -> float:
        raise NotImplementedError

    def joint_density(self, s, z) -> float:
        raise ModelError(f"{self.kind} model has no Lebesgue density")

    def spectral_sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def normalized_spectral(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Spectral functions bounded by ``series_bound`` with the same exponent measure."""
        raise NotImplementedError

    def block_kernel(self, ids, y) -> BlockKernel:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "sites": self.m}


# ----------------------------------------------------------------------------
# max-linear


class RayBlockKernel(BlockKernel):
    def __init__(self, model: "MaxLinearModel", ids, y, rtol: float = PATTERN_RTOL):
        self.model = model
        self.ids = np.asarray(ids, dtype=int)
        self.y = np.asarray(y, dtype=float)
        self.ref_dim = 1
        F = model.profiles
        a = self.ids[0]
        Fb = F[:, self.ids]
        ok = np.all(Fb > 0, axis=1)
        # y_B proportional to f_j(t_B):  y_b f_j(t_a) == y_a f_j(t_b)
        lhs = self.y[None, :] * Fb[:, [0]]
        rhs = self.y[0] * Fb
        ok &= np.all(np.abs(lhs - rhs) <= rtol * np.maximum(lhs, rhs), axis=1)
        self.rays = np.flatnonzero(ok)
        self.scale = self.y[0] / F[self.rays, a]
        mass = model.weights[self.rays] * F[self.rays, a]
        total = mass.sum()
        if total > 0:
            self.log_density = float(np.log(total) - 2.0 * np.log(self.y[0]))
            self.p = mass / total
        else:
            self.log_density = -np.inf
            self.p = mass
        vals = self.scale[:, None] * F[self.rays]
        vals[:, self.ids] = self.y
        self.values = vals

    def prob(self, ids, thresholds, seed: int = 0):
        if self.rays.size == 0:
            return 0.0, 0.0
        ok, free, thr = self._split(ids, thresholds)
        if not ok:
            return 0.0, 0.0
        hit = np.all(self.values[:, free] < thr, axis=1)
        return float(self.p[hit].sum()), 0.0

    def sample(self, rng, size):
        j = rng.choice(self.rays.size, size=size, p=self.p)
        return self.values[j].copy()

    def sample_rays(self, rng, size):
        j = rng.choice(self.rays.size, size=size, p=self.p)
        return self.values[j].copy(), self.rays[j]


class MaxLinearModel(SpectralModel):
    """eta(t) = max_j w_j Z_j f_j(t) with Z_j i.i.d. unit Frechet.

    The exponent measure puts intensity ``w_j r^-2 dr`` on each ray ``r f_j``.
    """

    kind = DISCRETE

    def __init__(self, grid: SiteVector, weights, profiles, label: str = "max-linear"):
        self.grid = grid
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        self.profiles = np.atleast_2d(np.asarray(profiles, dtype=float))
        self.label = label
        q, m = self.profiles.shape
        if m != len(grid):
            raise ModelError(f"profiles have {m} values, grid has {len(grid)} sites")
        if self.weights.size != q:
            raise ModelError("one weight per profile required")
        if q < 1:
            raise ModelError("at least one profile required")
        if np.any(self.profiles < 0) or not np.all(np.isfinite(self.profiles)):
            raise ModelError("profiles must be finite and nonnegative")
        if np.any(self.profiles.max(axis=1) <= 0):
            bad = np.flatnonzero(self.profiles.max(axis=1) <= 0).tolist()
            raise ModelError(f"zero profile(s) {bad} rejected")
        if np.any(self.weights <= 0):
            raise ModelError("weights must be strictly positive")
        self.margin = self.weights @ self.profiles
        self.simple = bool(np.allclose(self.margin, 1.0, rtol=1e-9, atol=0))
        self._norms = self.profiles.max(axis=1)
        self._ray_mass = self.weights * self._norms
        self.series_bound = float(self._ray_mass.sum())
        self.spectral_bound = self.series_bound

    @property
    def q(self) -> int:
        return self.weights.size

    @property
    def atoms(self) -> list[tuple[float, np.ndarray]]:
        return [(float(w), f.copy()) for w, f in zip(self.weights, self.profiles)]

    def _joint_tail(self, ids, x):
        return float(self.weights @ (self.profiles[:, ids] / x).max(axis=1))

    def normalized_spectral(self, rng, size):
        j = rng.choice(self.q, size=size, p=self._ray_mass / self.series_bound)
        return self.series_bound * self.profiles[j] / self._norms[j, None]

    def spectral_sample(self, rng, size=None):
        n = 1 if size is None else size
        out = self.normalized_spectral(rng, n)
        return out[0] if size is None else out

    def size_biased(self, t: int, rng, size: int) -> np.ndarray:
        """Draws of F / F(t) with ray j chosen with probability proportional to w_j f_j(t)."""
        mass = self.weights * self.profiles[:, t]
        if mass.sum() <= 0:
            raise ModelError(f"no ray reaches site {t}")
        j = rng.choice(self.q, size=size, p=mass / mass.sum())
        return self.profiles[j] / self.profiles[j, t][:, None]

    def block_kernel(self, ids, y):
        return RayBlockKernel(self, ids, y)

    def describe(self):
        return {"kind": self.kind, "label": self.label, "sites": self.m, "rays": self.q,
                "simple": self.simple}


def _normalize_weights(profiles: np.ndarray, w0: np.ndarray) -> np.ndarray:
    A = profiles.T
    live = A.max(axis=1) > 0
    A = A[live]
    target = np.ones(A.shape[0])
    w = w0 + np.linalg.pinv(A) @ (target - A @ w0)
    if np.all(w > 1e-12 * np.abs(w).max()) and np.allclose(A @ w, target, rtol=0, atol=1e-10):
        return w
    q = A.shape[1]
    # maximize the smallest weight subject to A w = 1
    c = np.zeros(q + 1)
    c[-1] = -1.0
    A_eq = np.hstack([A, np.zeros((A.shape[0], 1))])
    A_ub = np.hstack([-np.eye(q), np.ones((q, 1))])
    res = optimize.linprog(c, A_ub=A_ub, b_ub=np.zeros(q), A_eq=A_eq, b_eq=target,
                           bounds=[(0, None)] * q + [(None, 1e6)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-12:
        raise ModelError("normalization impossible: no strictly positive weights give unit margins")
    w = res.x[:q]
    # polish the equality constraints
    w = w + np.linalg.pinv(A) @ (target - A @ w)
    if np.any(w <= 0):
        raise ModelError("normalization impossible: no strictly positive weights give unit margins")
    return w


def make_max_linear_model(grid: SiteVector, weights, profiles, normalize: bool = False,
                          label: str = "max-linear") -> MaxLinearModel:
    profiles = np.atleast_2d(np.asarray(profiles, dtype=float))
    w = np.asarray(weights, dtype=float).reshape(-1)
    if profiles.shape[0] < 1:
        raise ModelError("q >= 1 required")
    if np.any(profiles.max(axis=1) <= 0):
        raise ModelError("zero profile rejected")
    if normalize:
        w = _normalize_weights(profiles, w)
    return MaxLinearModel(grid, w, profiles, label=label)


# ----------------------------------------------------------------------------
# moving maxima


@dataclass(frozen=True)
class ShiftKernel:
    """Nonnegative kernel supported in [-radius, radius] with known supremum."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    sup: float | None
    radius: float
    integral: float | None = None
    smooth: bool = True


def gaussian_kernel(scale: float = 1.0, radius_sd: float = 4.0) -> ShiftKernel:
    """Gaussian density with standard deviation ``scale`` truncated at ``radius_sd`` sds."""
    if scale <= 0 or radius_sd <= 0:
        raise ModelError("gaussian kernel needs positive scale and radius")
    R = radius_sd * scale
    norm = 1.0 / (scale * np.sqrt(2 * np.pi))

    def k(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= R, norm * np.exp(-0.5 * (x / scale) ** 2), 0.0)

    return ShiftKernel("gaussian", k, norm, R, float(2 * ndtr(radius_sd) - 1), smooth=True)


def indicator_kernel(half_width: float = 0.5) -> ShiftKernel:
    if half_width <= 0:
        raise ModelError("indicator kernel needs positive half width")

    def k(x):
        return (np.abs(np.asarray(x, dtype=float)) <= half_width).astype(float)

    return ShiftKernel("indicator", k, 1.0, half_width, 2.0 * half_width, smooth=False)


def _piecewise_quad(fun, points, epsabs=1e-13, epsrel=1e-11) -> float:
    pts = np.unique(np.asarray(points, dtype=float))
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 0:
            continue
        val, _ = integrate.quad(fun, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)
        total += val
    return total


class ShiftBlockKernel(BlockKernel):
    """Single-site kernel of a moving-maxima model: size-biased shift law."""

    def __init__(self, model: "MovingMaxModel", ids, y):
        ids = np.asarray(ids, dtype=int)
        if ids.size != 1:
            raise ModelError("moving-maxima exponent measure is neither discrete nor regular; "
                             "only single-site blocks are supported")
        self.model = model
        self.ids = ids
        self.y = np.asarray(y, dtype=float).reshape(-1)
        self.ref_dim = 1
        self.log_density = float(-2.0 * np.log(self.y[0]))  # simple max-stable margin
        self.t = float(model.x[ids[0]])

    def prob(self, ids, thresholds, seed: int = 0):
        ok, free, thr = self._split(ids, thresholds)
        if not ok:
            return 0.0, 0.0
        if free.size == 0:
            return 1.0, 0.0
        ker = self.model.kernel
        R = ker.radius
        t, y = self.t, self.y[0]
        xs = self.model.x[free]

        def g(u):
            kt = ker.func(t - u)
            return np.min(thr[:, None] * kt[None, :] - y * ker.func(xs[:, None] - u[None, :]), axis=0)

        brk = np.concatenate([[t - R, t + R], xs - R, xs + R])
        brk = np.unique(np.clip(brk, t - R, t + R))
        edges = [brk[0]]
        for a, b in zip(brk[:-1], brk[1:]):
            if ker.smooth:
                u = np.linspace(a, b, 401)[1:-1]
                gv = g(u)
                sgn = np.sign(gv)
                for i in np.flatnonzero(sgn[:-1] * sgn[1:] < 0):
                    edges.append(optimize.brentq(lambda v: g(np.array([v]))[0], u[i], u[i + 1],
                                                 xtol=1e-14))
            edges.append(b)
        edges = np.array(edges)
        total = 0.0
        kt = lambda u: float(ker.func(t - u))
        for a, b in zip(edges[:-1], edges[1:]):
            if b <= a:
                continue
            if g(np.array([0.5 * (a + b)]))[0] > 0:
                val, _ = integrate.quad(kt, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
                total += val
        return float(min(total / ker.integral, 1.0)), 0.0

    def sample(self, rng, size):
        return self.model.size_biased(self.ids[0], rng, size) * self.y[0]


class MovingMaxModel(SpectralModel):
    """Moving maxima eta(t) = max_i Gamma_i c k(t - U_i) on a 1-d grid.

    U is uniform on the site window enlarged by the kernel radius, and ``c``
    makes E[Y(t)] = 1 inside the window (unit Frechet margins).
    """

    kind = MOVING_MAX
    simple = True

    def __init__(self, grid: SiteVector, kernel: ShiftKernel, site_window=None):
        if grid.dim != 1:
            raise ModelError("moving-maxima model requires a 1-d grid")
        if kernel.sup is None or not np.isfinite(kernel.sup) or kernel.sup <= 0:
            raise ModelError("kernel with unknown supremum rejected")
        self.grid = grid
        self.kernel = kernel
        self.x = grid.coords[:, 0]
        if site_window is None:
            site_window = (float(self.x.min()), float(self.x.max()))
        a, b = map(float, site_window)
        if not (a <= self.x.min() and self.x.max() <= b):
            raise ModelError("grid sites must lie in the site window")
        self.window = (a, b)
        self.lo = a - kernel.radius
        self.hi = b + kernel.radius
        self.length = self.hi - self.lo
        integral = kernel.integral
        if integral is None:
            integral = _piecewise_quad(lambda u: float(kernel.func(u)), [-kernel.radius, 0.0, kernel.radius])
        self.kernel_integral = float(integral)
        self.c = self.length / self.kernel_integral
        self.spectral_bound = float(self.c * kernel.sup)
        self.series_bound = self.spectral_bound

    def mean_spectral(self, t) -> float:
        """E[Y(t)] by quadrature over the shift (equals 1 inside the window)."""
        xt = float(self.x[self._id(t)])
        R = self.kernel.radius
        f = lambda u: float(self.kernel.func(xt - u))
        val = _piecewise_quad(f, [self.lo, xt - R, xt, xt + R, self.hi])
        return self.c * val / self.length

    def _joint_tail(self, ids, x):
        xs = self.x[ids]
        R = self.kernel.radius
        ker = self.kernel.func
        f = lambda u: float(np.max(ker(xs - u) / x))
        pts = np.concatenate([[self.lo, self.hi], xs - R, xs + R, xs])
        pts = np.clip(pts, self.lo, self.hi)
        return self.c * _piecewise_quad(f, pts) / self.length

    def _shift_values(self, u):
        return self.c * self.kernel.func(self.x[None, :] - np.asarray(u)[:, None])

    def normalized_spectral(self, rng, size):
        u = rng.uniform(self.lo, self.hi, size=size)
        return self._shift_values(u)

    def spectral_sample(self, rng, size=None):
        n = 1 if size is None else size
        out = self.normalized_spectral(rng, n)
        return out[0] if size is None else out

    def size_biased(self, t: int, rng, size: int) -> np.ndarray:
        """Draws of F / F(t) with F ~ F(t) sigma(dF)."""
        ker = self.kernel
        R = ker.radius
        out = np.empty(0)
        need = size
        chunks = []
        while need > 0:
            d = rng.uniform(-R, R, size=max(2 * need, 16))
            acc = rng.uniform(size=d.size) * ker.sup < ker.func(d)
            d = d[acc][:need]
            chunks.append(d)
            need -= d.size
        d = np.concatenate(chunks) if chunks else out
        u = self.x[t] - d
        vals = ker.func(self.x[None, :] - u[:, None]) / ker.func(d)[:, None]
        vals[:, t] = 1.0
        return vals

    def block_kernel(self, ids, y):
        return ShiftBlockKernel(self, ids, y)

    def describe(self):
        return {"kind": self.kind, "kernel": self.kernel.name, "sites": self.m,
                "window": list(self.window)}


def make_moving_max_model(grid: SiteVector, kernel: ShiftKernel, site_window=None) -> MovingMaxModel:
    return MovingMaxModel(grid, kernel, site_window)


# ----------------------------------------------------------------------------
# log-Gaussian (Brown-Resnick type)


def power_variogram(scale: float = 1.0, exponent: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """gamma(h) = (|h| / scale) ** exponent, 0 < exponent <= 2."""
    if scale <= 0 or not (0 < exponent <= 2):
        raise ModelError("power variogram needs scale > 0 and exponent in (0, 2]")

    def gamma(h):
        # trailing axis holds the lag coordinates
        h = np.asarray(h, dtype=float)
        return (np.sqrt((h ** 2).sum(axis=-1)) / scale) ** exponent

    gamma.params = {"type": "power", "scale": scale, "exponent": exponent}
    return gamma


def zero_variogram(h):
    h = np.asarray(h, dtype=float)
    return np.zeros(h.shape[:-1])


def _sqrt_psd(cov: np.ndarray) -> np.ndarray:
    if cov.size == 0:
        return cov
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0, None))


class GaussianBlockKernel(BlockKernel):
    """P_{t_B}(y_B, .) for the log-Gaussian model.

    Anchored at a = B[0]: log(f/f(t_a)) on the other sites is Gaussian with
    mean -gamma(a, .)/2 and covariance (gamma_aj + gamma_ak - gamma_jk)/2;
    f(t_a) = y_a and the remaining block coordinates are fixed by conditioning.
    """

    def __init__(self, model: "LogGaussianModel", ids, y, mvn_rtol: float = 1e-4):
        self.model = model
        self.ids = np.asarray(ids, dtype=int)
        self.y = np.asarray(y, dtype=float)
        self.ref_dim = self.ids.size
        self.mvn_rtol = mvn_rtol
        if self.ids.size > MAX_DENSITY_DIM:
            raise CapacityError(f"log-Gaussian block of size {self.ids.size} exceeds {MAX_DENSITY_DIM}")
        a = self.ids[0]
        others, mean, cov = model.anchored(a)
        pos = {g: i for i, g in enumerate(others)}
        bpos = np.array([pos[g] for g in self.ids[1:]], dtype=int)
        rmask = np.ones(others.size, dtype=bool)
        rmask[bpos] = False
        self.rest = others[rmask]
        v = np.log(self.y[1:] / self.y[0])
        ya = self.y[0]
        if bpos.size:
            Cbb = cov[np.ix_(bpos, bpos)]
            Crb = cov[np.ix_(rmask, bpos)]
            dev = v - mean[bpos]
            sol = np.linalg.solve(Cbb, np.column_stack([dev, Crb.T]))
            self.cmean = mean[rmask] + Crb @ sol[:, 0]
            self.ccov = cov[np.ix_(rmask, rmask)] - Crb @ sol[:, 1:]
            logphi = multivariate_normal(mean=np.zeros(bpos.size), cov=Cbb).logpdf(dev)
            self.log_density = float(-2 * np.log(ya) - np.log(self.y[1:]).sum() + logphi)
        else:
            self.cmean = mean[rmask]
            self.ccov = cov[np.ix_(rmask, rmask)]
            self.log_density = float(-2 * np.log(ya))
        self.ccov = 0.5 * (self.ccov + self.ccov.T)
        self._rpos = {g: i for i, g in enumerate(self.rest)}
        self._root = None

    def prob(self, ids, thresholds, seed: int = 0):
        ok, free, thr = self._split(ids, thresholds)
        if not ok:
            return 0.0, 0.0
        if free.size == 0:
            return 1.0, 0.0
        idx = np.array([self._rpos[g] for g in free], dtype=int)
        upper = np.log(thr / self.y[0]) - self.cmean[idx]
        cov = self.ccov[np.ix_(idx, idx)]
        return mvn_cdf(MvnProblem(np.zeros(idx.size), cov, upper, rtol=self.mvn_rtol, atol=1e-12),
                       seed=seed)

    def sample(self, rng, size):
        out = np.empty((size, self.model.m))
        out[:, self.ids] = self.y
        if self.rest.size:
            if self._root is None:
                self._root = _sqrt_psd(self.ccov)
            g = self.cmean + rng.standard_normal((size, self.rest.size)) @ self._root.T
            out[:, self.rest] = self.y[0] * np.exp(g)
        return out


class LogGaussianModel(SpectralModel):
    """Spectral functions Y(t) = exp(W(t) - Var W(t) / 2), W centered Gaussian
    with variogram gamma(s - t) = Var(W(s) - W(t))."""

    kind = REGULAR
    simple = True

    def __init__(self, grid: SiteVector, variogram: Callable):
        self.grid = grid
        self.variogram = variogram
        coords = grid.coords
        G = np.asarray(variogram(coords[:, None, :] - coords[None, :, :]), dtype=float)
        m = len(grid)
        if G.shape != (m, m) or not np.all(np.isfinite(G)):
            raise ModelError("variogram must return finite values")
        if not np.allclose(G, G.T, rtol=1e-12, atol=1e-14) or np.any(np.diag(G) != 0) or np.any(G < 0):
            raise ModelError("variogram matrix must be symmetric, nonnegative, zero on the diagonal")
        self.gamma = 0.5 * (G + G.T)
        self.spectral_bound = None
        self.series_bound = float(m)
        self.mvn_rtol = 1e-4
        self._anchored = {}
        if m > 1:
            _, _, C = self.anchored(0)
            ev = np.linalg.eigvalsh(C)
            scale = max(np.abs(ev).max(), 1e-300)
            if ev.min() < -1e-10 * scale:
                raise ModelError("variogram is not conditionally negative definite on the grid "
                                 "(non-PSD covariance)")
            if ev.min() <= 1e-10 * scale:
                raise ModelError("variogram gives a degenerate Gaussian on the grid; "
                                 "the model is not regular")

    def anchored(self, a: int):
        """(other ids, mean, covariance) of log(Y/Y(t_a)) under the Y(t_a)-tilted law."""
        if a not in self._anchored:
            others = np.array([j for j in range(self.m) if j != a], dtype=int)
            G = self.gamma
            ga = G[a, others]
            cov = 0.5 * (ga[:, None] + ga[None, :] - G[np.ix_(others, others)])
            self._anchored[a] = (others, -0.5 * ga, cov, _sqrt_psd(cov))
        others, mean, cov, _ = self._anchored[a]
        return others, mean, cov

    def _joint_tail(self, ids, x):
        l = ids.size
        if l == 1:
            return 1.0 / x[0]
        if l - 1 > MAX_DIM:
            raise CapacityError(f"joint tail over {l} sites exceeds capacity")
        G = self.gamma[np.ix_(ids, ids)]
        total = 0.0
        for i in range(l):
            o = [j for j in range(l) if j != i]
            upper = np.log(x[o] / x[i]) + 0.5 * G[i, o]
            cov = 0.5 * (G[i, o][:, None] + G[i, o][None, :] - G[np.ix_(o, o)])
            p, _ = mvn_cdf(MvnProblem(np.zeros(l - 1), cov, upper, rtol=1e-5, atol=1e-13), seed=i)
            total += p / x[i]
        return total

    def joint_density(self, s, z) -> float:
        ids = site_ids(self.grid, s)
        z = np.asarray(z, dtype=float).reshape(-1)
        if ids.size > MAX_DENSITY_DIM:
            raise CapacityError(f"density over {ids.size} sites exceeds {MAX_DENSITY_DIM}")
        if len(set(ids.tolist())) != ids.size:
            raise ValueError("density sites must be distinct")
        if np.any(z <= 0):
            return 0.0
        if ids.size == 1:
            return float(1.0 / z[0] ** 2)
        G = self.gamma[np.ix_(ids, ids)]
        g1 = G[0, 1:]
        cov = 0.5 * (g1[:, None] + g1[None, :] - G[1:, 1:])
        dev = np.log(z[1:] / z[0]) + 0.5 * g1
        logphi = multivariate_normal(mean=np.zeros(ids.size - 1), cov=cov).logpdf(dev)
        return float(np.exp(logphi - 2 * np.log(z[0]) - np.log(z[1:]).sum()))

    def spectral_sample(self, rng, size=None):
        """Raw spectral functions anchored at grid site 0 (W(t_0) = 0)."""
        n = 1 if size is None else size
        others, mean, cov, root = self._anchored_full(0)
        out = np.ones((n, self.m))
        if others.size:
            w = rng.standard_normal((n, others.size)) @ root.T
            out[:, others] = np.exp(w - 0.5 * np.diag(cov))
        return out[0] if size is None else out

    def _anchored_full(self, a):
        self.anchored(a)
        return self._anchored[a]

    def normalized_spectral(self, rng, size):
        """m * Y / sum(Y) under the mixture of the Y(t_i)-tilted laws (bounded by m)."""
        anchors = rng.integers(0, self.m, size=size)
        out = np.ones((size, self.m))
        z = rng.standard_normal((size, max(self.m - 1, 0)))
        for a in range(self.m):
            rows = np.flatnonzero(anchors == a)
            if rows.size == 0 or self.m == 1:
                continue
            others, mean, cov, root = self._anchored_full(a)
            out[np.ix_(rows, others)] = np.exp(mean + z[rows] @ root.T)
        return self.m * out / out.sum(axis=1, keepdims=True)

    def size_biased(self, t: int, rng, size: int) -> np.ndarray:
        others, mean, cov, root = self._anchored_full(t)
        out = np.ones((size, self.m))
        if others.size:
            out[:, others] = np.exp(mean + rng.standard_normal((size, others.size)) @ root.T)
        return out

    def block_kernel(self, ids, y):
        return GaussianBlockKernel(self, ids, y, mvn_rtol=self.mvn_rtol)

    def describe(self):
        d = {"kind": self.kind, "sites": self.m}
        params = getattr(self.variogram, "params", None)
        if params:
            d["variogram"] = params
        return d


def make_log_gaussian_model(grid: SiteVector, variogram: Callable) -> SpectralModel:
    """Log-Gaussian model; an identically zero variogram gives the perfectly
    dependent field, represented exactly as a single-ray max-linear model."""
    coords = grid.coords
    G = np.asarray(variogram(coords[:, None, :] - coords[None, :, :]), dtype=float)
    if np.all(G == 0):
        return MaxLinearModel(grid, [1.0], np.ones((1, len(grid))), label="log-gaussian (degenerate)")
    return LogGaussianModel(grid, variogram)
