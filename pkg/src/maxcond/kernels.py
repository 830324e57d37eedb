"""Ingredients of the conditional law given eta(t) = y.

For a partition tau of the conditioning indices the measure nu^tau has, per
block B, the factor

    h_{t_B}(y_B) * P_{t_B}(y_B, {f(t_{B^c}) < y_{B^c}})

(a density times the conditional probability of staying below y off the
block).  Block factors only depend on B, so they are computed once per subset
and shared by all partitions containing that block.  The common factor
exp(-mu_t(y)) cancels in the posterior and is only applied for the density
of nu_t and for conditional CDFs.

For discrete spectral measures the block densities live on 1-dimensional
rays, so partitions with fewer blocks live on lower dimensional sets.  When
several partitions have positive weight only those with the smallest total
reference dimension carry posterior mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from maxcond.errors import AcceptanceFloorError, CapacityError, InconsistentObservation, ModelError
from maxcond.grid import ObservationSet, site_ids
from maxcond.models import DISCRETE, MAX_DENSITY_DIM, MOVING_MAX, REGULAR, BlockKernel, MaxLinearModel, SpectralModel
from maxcond.partitions import Partition, enumerate_partitions
from maxcond.samplers import AtomFunction, Origin, PointMeasureRealization, series_batch

ACCEPTANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class SubextremalIntensity:
    """Intensity 1{f(t) < y} mu(df): exponent measure thinned at the conditioning sites."""

    ids: np.ndarray
    y: np.ndarray

    def admits(self, values: np.ndarray) -> np.ndarray:
        return np.all(np.atleast_2d(values)[:, self.ids] < self.y, axis=1)


@dataclass
class ConditionalLaw:
    model: SpectralModel
    obs: ObservationSet
    partitions: list[Partition]
    raw_log_weights: np.ndarray
    log_weights: np.ndarray
    pi: np.ndarray
    ref_dims: np.ndarray
    subextremal_intensity: SubextremalIntensity
    _kernels: dict = field(default_factory=dict, repr=False)
    _comp: dict = field(default_factory=dict, repr=False)

    def kernel(self, block) -> BlockKernel:
        block = tuple(block)
        if block not in self._kernels:
            self._kernels[block] = self.model.block_kernel(self.obs.ids[list(block)],
                                                           self.obs.y[list(block)])
        return self._kernels[block]

    def complement(self, block):
        comp = [i for i in range(self.obs.k) if i not in block]
        return self.obs.ids[comp], self.obs.y[comp]

    def complement_prob(self, block) -> tuple[float, float]:
        block = tuple(block)
        if block not in self._comp:
            cid, cy = self.complement(block)
            self._comp[block] = self.kernel(block).prob(cid, cy)
        return self._comp[block]

    def block_kernels(self, tau: Partition) -> list[BlockKernel]:
        return [self.kernel(b) for b in tau.blocks]

    def draw_block(self, block, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` draws from P_{t_B}(y_B, .) restricted to {f(t_{B^c}) < y_{B^c}}, by rejection."""
        block = tuple(block)
        ker = self.kernel(block)
        cid, cy = self.complement(block)
        if cid.size == 0:
            return ker.sample(rng, size)
        p, _ = self.complement_prob(block)
        if p < ACCEPTANCE_FLOOR:
            raise AcceptanceFloorError(p, ACCEPTANCE_FLOOR, f"block {block} of {self.obs.ids.tolist()}")
        out, need = [], size
        while need > 0:
            batch = int(min(max(np.ceil(1.3 * need / p), 64), 500_000))
            prop = ker.sample(rng, batch)
            ok = np.all(prop[:, cid] < cy, axis=1)
            acc = prop[ok][:need]
            out.append(acc)
            need -= acc.shape[0]
        return np.concatenate(out)

    def table(self) -> list[tuple[str, float, float]]:
        return [(p.to_string(), float(lw), float(pi))
                for p, lw, pi in zip(self.partitions, self.raw_log_weights, self.pi)]

    def index(self, tau: Partition) -> int:
        return self.partitions.index(tau)


def _check_capacity(model: SpectralModel, k: int):
    if model.kind == REGULAR and k > MAX_DENSITY_DIM:
        raise CapacityError(f"regular model with k = {k} > {MAX_DENSITY_DIM} conditioning sites")
    if model.kind == MOVING_MAX and k > 1:
        raise ModelError("moving-maxima model: only single-site conditioning is supported "
                         "(its exponent measure is neither discrete nor regular)")


def _block_log_weight(law: ConditionalLaw, block) -> float:
    ker = law.kernel(block)
    if not np.isfinite(ker.log_density):
        return -np.inf
    p, _ = law.complement_prob(block)
    return float(ker.log_density + np.log(p)) if p > 0 else -np.inf


def _empty_law(model, obs) -> ConditionalLaw:
    return ConditionalLaw(model, obs, [], np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0, int),
                          SubextremalIntensity(obs.ids, obs.y))


def partition_log_weight(model: SpectralModel, obs: ObservationSet, tau: Partition,
                         law: ConditionalLaw | None = None) -> float:
    """log of the nu^tau density at y without the factor exp(-mu_t(y)); -inf if incompatible."""
    if tau.k != obs.k:
        raise ValueError("partition size differs from the number of observations")
    _check_capacity(model, obs.k)
    law = law or _empty_law(model, obs)
    return float(sum(_block_log_weight(law, b) for b in tau.blocks))


def scenario_posterior(model: SpectralModel, obs: ObservationSet) -> ConditionalLaw:
    _check_capacity(model, obs.k)
    parts = enumerate_partitions(obs.k)
    law = _empty_law(model, obs)
    cache: dict = {}
    raw = np.empty(len(parts))
    dims = np.empty(len(parts), dtype=int)
    for i, tau in enumerate(parts):
        total, dim = 0.0, 0
        for b in tau.blocks:
            if b not in cache:
                cache[b] = _block_log_weight(law, b)
            total += cache[b]
            dim += law.kernel(b).ref_dim
        raw[i] = total
        dims[i] = dim
    finite = np.isfinite(raw)
    if not finite.any():
        raise InconsistentObservation(
            f"no hitting scenario can produce y = {obs.y.tolist()} at sites {obs.ids.tolist()}")
    lowest = dims[finite].min()
    eff = np.where(finite & (dims == lowest), raw, -np.inf)
    pi = np.exp(eff - logsumexp(eff))
    pi /= pi.sum()
    law.partitions = parts
    law.raw_log_weights = raw
    law.log_weights = eff
    law.pi = pi
    law.ref_dims = dims
    return law


def nu_density(model: SpectralModel, obs: ObservationSet, law: ConditionalLaw | None = None) -> float:
    """Density of the law of eta(t) at y for regular models."""
    if model.kind != REGULAR:
        raise ModelError("nu_t has a Lebesgue density only for regular models")
    if np.any(obs.y <= 0):
        return 0.0
    law = law or scenario_posterior(model, obs)
    return float(np.exp(-model.joint_tail(obs.ids, obs.y) + logsumexp(law.log_weights)))


def sample_extremal_block(law: ConditionalLaw, tau: Partition, j: int,
                          rng: np.random.Generator) -> AtomFunction:
    idx = law.index(tau)
    if law.pi[idx] <= 0:
        raise ValueError(f"partition {tau} has zero posterior mass")
    vals = law.draw_block(tau.blocks[j], rng, 1)[0]
    return AtomFunction(vals, float(vals[law.obs.ids[tau.blocks[j][0]]]), Origin.EXTREMAL)


def sample_subextremal(law: ConditionalLaw, rng: np.random.Generator,
                       threshold: float = 1e-2) -> PointMeasureRealization:
    """Poisson measure with intensity 1{f(t) < y} mu(df).

    Unconditional series atoms are generated down to scale ``threshold /
    series_bound`` (so every atom with sup norm above ``threshold`` is present)
    and atoms violating f(t) < y are removed.
    """
    model = law.model
    sub = law.subextremal_intensity
    res = series_batch(model, rng, 1, floor=np.full((1, model.m), threshold),
                       keep=lambda rows, A: sub.admits(A), record=True,
                       min_scale=threshold / model.series_bound)
    vals, scl = res.atoms[0]
    big = vals.max(axis=1) > threshold if vals.size else np.zeros(0, bool)
    atoms = [AtomFunction(v, float(s), Origin.SUBEXTREMAL) for v, s in zip(vals[big], scl[big])]
    return PointMeasureRealization(atoms, threshold, res.exact)


def conditional_cdf(model: SpectralModel, obs: ObservationSet, s, z,
                    law: ConditionalLaw | None = None) -> tuple[float, float]:
    """P(eta(s) < z | eta(t) = y) with a standard error from the block integrals."""
    s_ids = site_ids(model.grid, s)
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != s_ids.size:
        raise ValueError("one threshold per query site required")
    if np.any(z <= 0):
        return 0.0, 0.0
    law = law or scenario_posterior(model, obs)
    both = model.joint_tail(np.concatenate([s_ids, obs.ids]), np.concatenate([z, obs.y]))
    base = model.joint_tail(obs.ids, obs.y)
    expo = max(both - base, 0.0)
    total, var = 0.0, 0.0
    for tau, w in zip(law.partitions, law.pi):
        if w <= 0:
            continue
        prod, rel2 = 1.0, 0.0
        for b in tau.blocks:
            cid, cy = law.complement(b)
            num, se_n = law.kernel(b).prob(np.concatenate([cid, s_ids]), np.concatenate([cy, z]))
            den, se_d = law.complement_prob(b)
            prod *= num / den
            if num > 0:
                rel2 += (se_n / num) ** 2
            rel2 += (se_d / den) ** 2
            if prod == 0:
                break
        total += w * prod
        var += (w * prod) ** 2 * rel2
    p = float(np.exp(-expo) * total)
    return min(max(p, 0.0), 1.0), float(np.exp(-expo) * np.sqrt(var))


def single_site_cdf_closed_form(model: MaxLinearModel, t: int, y: float, s, z) -> float:
    """P(eta(s) < z | eta(t) = y) for a max-linear model, written as finite sums.

    With p_j proportional to w_j f_j(t):
        exp(-sum_j w_j (max_i f_j(s_i)/z_i - f_j(t)/y)^+) * sum_j p_j 1{y f_j(s)/f_j(t) < z}
    """
    if model.kind != DISCRETE:
        raise ModelError("closed form requires a discrete spectral measure")
    s_ids = site_ids(model.grid, s)
    z = np.asarray(z, dtype=float).reshape(-1)
    F, w = model.profiles, model.weights
    ft = F[:, t]
    expo = float(np.sum(w * np.maximum((F[:, s_ids] / z).max(axis=1) - ft / y, 0.0)))
    on = ft > 0
    p = w[on] * ft[on]
    p = p / p.sum()
    vals = y * F[np.ix_(on, s_ids)] / ft[on, None]
    if t in s_ids.tolist():
        vals[:, s_ids == t] = y
    hit = np.all(vals < z, axis=1)
    return float(np.exp(-expo) * p[hit].sum())
