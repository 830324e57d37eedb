"""Unconditional simulation, extremal decomposition and conditional sampling.

Unconditional fields use the series eta = max_i zeta_i Y_i where
zeta_1 > zeta_2 > ... are the points of a Poisson process with intensity
r^-2 dr (zeta_i = 1 / (E_1 + ... + E_i)) and Y_i are i.i.d. spectral
functions bounded by ``model.series_bound``.  Generation stops as soon as
``zeta * bound`` falls below the current minimum of the partial maximum over
the grid; no later atom can touch the field, so the realization is exact on
the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import ndtr

from maxcond.errors import InvariantViolation, ModelError, SimulationBudgetError
from maxcond.grid import ObservationSet, SiteVector, site_ids
from maxcond.models import DISCRETE, LogGaussianModel, MaxLinearModel, SpectralModel


class Origin(str, Enum):
    SIMULATED = "simulated"
    EXTREMAL = "extremal-draw"
    SUBEXTREMAL = "subextremal-draw"


@dataclass(frozen=True)
class AtomFunction:
    values: np.ndarray
    scale: float
    origin: Origin = Origin.SIMULATED

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if np.any(v < 0) or not np.any(v > 0):
            raise ValueError("atom values must be nonnegative and not identically zero")


@dataclass
class PointMeasureRealization:
    atoms: list[AtomFunction]
    truncation_threshold: float = 0.0
    exact: bool = True

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def matrix(self) -> np.ndarray:
        if not self.atoms:
            return np.zeros((0, 0))
        return np.array([a.values for a in self.atoms])

    def maximum(self, m: int | None = None) -> np.ndarray:
        if not self.atoms:
            return np.zeros(m or 0)
        return self.matrix.max(axis=0)


@dataclass
class Decomposition:
    extremal: PointMeasureRealization
    subextremal: PointMeasureRealization
    K: np.ndarray
    approximate: bool = False


@dataclass
class SimOptions:
    method: str = "exact"          # "exact" or "truncated" (raw unbounded spectral functions)
    eps_trunc: float = 1e-3
    max_atoms: int = 1_000_000


@dataclass
class SeriesResult:
    eta: np.ndarray
    labels: np.ndarray             # per site: index of the atom attaining the max, -1 for the floor
    n_atoms: np.ndarray
    n_kept: np.ndarray
    stop_scale: np.ndarray
    exact: bool
    atoms: list | None = None      # per replicate: (values, scales)
    bias_bound: np.ndarray | None = None
    n_kept_above: np.ndarray | None = None


def _lognormal_exceedance(a: float, b: np.ndarray, v: np.ndarray) -> np.ndarray:
    """E[(a Y - b)^+] for Y = exp(N - v/2), N ~ N(0, v), elementwise over sites."""
    out = np.maximum(a - b, 0.0)
    pos = v > 0
    sv = np.sqrt(v[pos])
    d1 = (np.log(a / b[pos]) + 0.5 * v[pos]) / sv
    out[pos] = a * ndtr(d1) - b[pos] * ndtr(d1 - sv)
    return out


def series_batch(model: SpectralModel, rng: np.random.Generator, n: int, *,
                 floor: np.ndarray | None = None, keep=None, record: bool = False,
                 opts: SimOptions | None = None, min_scale: float = 0.0) -> SeriesResult:
    """Simulate ``n`` independent realizations of the series on the model grid.

    ``floor`` (n x m) is a lower envelope already present in the field (the
    extremal atoms of the conditional sampler); ``keep`` maps an (a x m) atom
    block to a boolean mask and implements thinning.  Atoms failing ``keep``
    are discarded.  Generation continues at least until zeta < ``min_scale``.
    """
    opts = opts or SimOptions()
    m = model.m
    truncated = opts.method == "truncated"
    if truncated:
        if not isinstance(model, LogGaussianModel):
            raise ModelError("truncated series only applies to unbounded spectral models")
        bound = None
        spectral = model.spectral_sample
        raw_var = model.gamma[0].copy()
    elif opts.method == "exact":
        bound = model.series_bound
        spectral = model.normalized_spectral
    else:
        raise ValueError(f"unknown method {opts.method!r}")

    eta = np.zeros((n, m)) if floor is None else np.array(floor, dtype=float, copy=True)
    labels = np.full((n, m), -1, dtype=int)
    gsum = np.zeros(n)
    n_atoms = np.zeros(n, dtype=int)
    n_kept = np.zeros(n, dtype=int)
    n_above = np.zeros(n, dtype=int)
    stop_scale = np.zeros(n)
    rec_rep, rec_vals, rec_scale = [], [], []
    active = np.arange(n)
    step = 0
    while active.size:
        gsum[active] += rng.standard_exponential(active.size)
        zeta = 1.0 / gsum[active]
        cur_min = eta[active].min(axis=1)
        if bound is not None:
            stop = zeta * bound < cur_min
        else:
            stop = (cur_min > 0) & (zeta < opts.eps_trunc * cur_min)
        if min_scale > 0:
            stop &= zeta < min_scale
        stop_scale[active[stop]] = zeta[stop]
        active = active[~stop]
        zeta = zeta[~stop]
        if not active.size:
            break
        if step >= opts.max_atoms:
            raise SimulationBudgetError(
                f"stopping rule not reached after {step} atoms for {active.size} replicates",
                partial={"eta": eta, "labels": labels, "active": active})
        A = zeta[:, None] * spectral(rng, active.size)
        n_atoms[active] += 1
        ok = np.ones(active.size, dtype=bool) if keep is None else keep(active, A)
        n_kept[active] += ok
        if min_scale > 0:
            n_above[active] += ok & (zeta >= min_scale)
        cur = eta[active]
        upd = (A > cur) & ok[:, None]
        eta[active] = np.where(upd, A, cur)
        lab = labels[active]
        lab[upd] = step
        labels[active] = lab
        if record:
            sel = ok & (A.max(axis=1) > 0)
            rec_rep.append(active[sel])
            rec_vals.append(A[sel])
            rec_scale.append(zeta[sel])
        step += 1

    atoms = None
    if record:
        atoms = [(np.zeros((0, m)), np.zeros(0)) for _ in range(n)]
        if rec_rep:
            reps = np.concatenate(rec_rep)
            vals = np.concatenate(rec_vals)
            scl = np.concatenate(rec_scale)
            order = np.argsort(reps, kind="stable")
            reps, vals, scl = reps[order], vals[order], scl[order]
            cuts = np.searchsorted(reps, np.arange(n + 1))
            atoms = [(vals[cuts[i]:cuts[i + 1]], scl[cuts[i]:cuts[i + 1]]) for i in range(n)]
    bias = None
    if truncated:
        bias = np.array([
            (_lognormal_exceedance(stop_scale[i], eta[i], raw_var) / (eta[i] * stop_scale[i])).sum()
            for i in range(n)])
    return SeriesResult(eta, labels, n_atoms, n_kept, stop_scale, not truncated, atoms, bias,
                        n_above if min_scale > 0 else None)


def ray_maxima(model: MaxLinearModel, rng: np.random.Generator, n: int):
    """Exact max-linear fields: eta = max_j (w_j / E_j) f_j; labels are ray indices."""
    top = model.weights / rng.standard_exponential((n, model.q))
    vals = top[:, :, None] * model.profiles[None, :, :]
    return vals.max(axis=1), vals.argmax(axis=1)


def simulate_fields(model: SpectralModel, rng: np.random.Generator, n: int,
                    opts: SimOptions | None = None):
    """Fields and per-site argmax-atom labels for ``n`` replicates (no atom lists)."""
    if isinstance(model, MaxLinearModel) and (opts is None or opts.method == "exact"):
        return ray_maxima(model, rng, n)
    res = series_batch(model, rng, n, opts=opts)
    return res.eta, res.labels


def simulate_unconditional(model: SpectralModel, rng: np.random.Generator,
                           opts: SimOptions | None = None):
    """One realization: (PointMeasureRealization, eta on the grid)."""
    res = series_batch(model, rng, 1, record=True, opts=opts)
    return _realization(res, 0), res.eta[0]


def simulate_realizations(model: SpectralModel, rng: np.random.Generator, n: int,
                          opts: SimOptions | None = None):
    res = series_batch(model, rng, n, record=True, opts=opts)
    return [_realization(res, i) for i in range(n)], res.eta


def _realization(res: SeriesResult, i: int, origin: Origin = Origin.SIMULATED):
    vals, scl = res.atoms[i]
    atoms = [AtomFunction(v, float(s), origin) for v, s in zip(vals, scl)]
    thr = float(res.stop_scale[i])
    return PointMeasureRealization(atoms, thr, res.exact)


def decompose(real: PointMeasureRealization, K) -> Decomposition:
    ids = K.ids if isinstance(K, SiteVector) else np.atleast_1d(np.asarray(K, dtype=int))
    approx = not real.exact
    if not real.atoms:
        empty = PointMeasureRealization([], real.truncation_threshold, real.exact)
        return Decomposition(empty, PointMeasureRealization([], real.truncation_threshold, real.exact),
                             ids, approx)
    M = real.matrix
    eta = M.max(axis=0)
    ext = np.any(M[:, ids] >= eta[ids], axis=1)
    plus = [a for a, e in zip(real.atoms, ext) if e]
    minus = [a for a, e in zip(real.atoms, ext) if not e]
    return Decomposition(PointMeasureRealization(plus, real.truncation_threshold, real.exact),
                         PointMeasureRealization(minus, real.truncation_threshold, real.exact),
                         ids, approx)


def check_decomposition(real: PointMeasureRealization, dec: Decomposition) -> list[str]:
    """Violations of the decomposition identities (empty list when all hold)."""
    problems = []
    ids = dec.K
    all_ids = {id(a) for a in real.atoms}
    plus = [id(a) for a in dec.extremal.atoms]
    minus = [id(a) for a in dec.subextremal.atoms]
    if len(plus) + len(minus) != len(real.atoms) or set(plus) | set(minus) != all_ids \
            or set(plus) & set(minus):
        problems.append("extremal + subextremal != input")
    if not real.atoms:
        return problems
    eta = real.matrix.max(axis=0)
    if not dec.extremal.atoms:
        problems.append("no extremal atom")
        return problems
    mp = dec.extremal.matrix.max(axis=0)
    if not np.array_equal(mp[ids], eta[ids]):
        problems.append("max(extremal) != eta on K")
    if dec.subextremal.atoms:
        mm = dec.subextremal.matrix.max(axis=0)
        if not np.all(mm[ids] < eta[ids]):
            problems.append("max(subextremal) not strictly below eta on K")
    return problems


# ----------------------------------------------------------------------------
# conditional sampling


def _thinning_keep(obs: ObservationSet):
    tids = obs.ids
    y = obs.y

    def keep(rows, A):
        return np.all(A[:, tids] < y, axis=1)

    return keep


def sample_conditional(model: SpectralModel, obs: ObservationSet, rng: np.random.Generator,
                       n: int, law=None, details: bool = False, count_level: float = 0.0,
                       opts: SimOptions | None = None):
    """``n`` independent fields from the conditional law given eta(t) = y.

    Three steps: a hitting scenario from the posterior, one extremal function
    per block from its constrained kernel, and an independent Poisson measure
    thinned to {f(t) < y}.  With ``details`` a dict with the drawn partition
    indices and the number of thinned atoms with scale >= ``count_level`` is
    also returned.
    """
    from maxcond.kernels import scenario_posterior

    if law is None:
        law = scenario_posterior(model, obs)
    part_idx = rng.choice(len(law.partitions), size=n, p=law.pi)
    floor = np.zeros((n, model.m))
    for pi_idx in np.unique(part_idx):
        rows = np.flatnonzero(part_idx == pi_idx)
        for block in law.partitions[pi_idx].blocks:
            psi = law.draw_block(block, rng, rows.size)
            floor[rows] = np.maximum(floor[rows], psi)
    res = series_batch(model, rng, n, floor=floor, keep=_thinning_keep(obs), opts=opts,
                       min_scale=count_level)
    fields = res.eta
    fields[:, obs.ids] = np.where(fields[:, obs.ids] == obs.y, fields[:, obs.ids], np.nan)
    if np.isnan(fields[:, obs.ids]).any():
        raise InvariantViolation("conditional sample misses a conditioning value")
    if details:
        return fields, {"partition": part_idx, "n_kept": res.n_kept,
                        "n_kept_above": res.n_kept_above}
    return fields


# ----------------------------------------------------------------------------
# extremal function of a single site


def extremal_function_distribution_check(model: SpectralModel, t: int, n: int,
                                         rng: np.random.Generator, alpha: float = 0.01,
                                         opts: SimOptions | None = None) -> dict:
    """Extract the {t}-extremal atom from ``n`` realizations.

    Returns the extremal counts, a KS test of phi_t^+(t) against
    exp(-mu_t(x)) (unit Frechet for simple models) and, for discrete models,
    the ray frequencies of phi_t^+ against the weights predicted by the
    extremal function law (computed by quadrature over the ray scale).
    """
    from maxcond.oracle import chi2_test, ks_test

    reals, eta = simulate_realizations(model, rng, n, opts)
    counts = np.zeros(n, dtype=int)
    top = np.zeros(n)
    ratios = []
    for i, real in enumerate(reals):
        dec = decompose(real, [t])
        counts[i] = len(dec.extremal)
        if counts[i] != 1:
            raise InvariantViolation(f"run {i}: {counts[i]} extremal atoms at site {t}")
        phi = dec.extremal.atoms[0].values
        top[i] = phi[t]
        ratios.append(phi / phi[t])
    tail_at_1 = model.marginal_tail(t, 1.0)
    out = {
        "n": n,
        "extremal_count_min": int(counts.min()),
        "extremal_count_max": int(counts.max()),
        "ks": ks_test(top, lambda x: np.exp(-tail_at_1 / np.asarray(x)), alpha=alpha),
        "values": top,
    }
    if model.kind == DISCRETE:
        from scipy import integrate

        ratios = np.array(ratios)
        prof = model.profiles / np.where(model.profiles[:, [t]] > 0, model.profiles[:, [t]], np.inf)
        ray = np.full(n, -1)
        for j in range(model.q):
            if model.profiles[j, t] > 0:
                hit = np.all(np.isclose(ratios, prof[j], rtol=1e-9, atol=1e-12), axis=1)
                ray[hit & (ray < 0)] = j
        c = model.marginal_tail(t, 1.0)
        expected = []
        for j in range(model.q):
            ft = model.profiles[j, t]
            if ft <= 0:
                expected.append(0.0)
                continue
            # P(phi_t^+ on ray j) = int exp(-mu_t(r f_j(t))) w_j r^-2 dr
            val, _ = integrate.quad(lambda u: np.exp(-c * u / ft), 0, np.inf, epsabs=1e-13)
            expected.append(model.weights[j] * val)
        expected = np.array(expected)
        observed = np.bincount(ray[ray >= 0], minlength=model.q)
        out["ray_expected"] = expected
        out["ray_observed"] = observed
        out["unassigned"] = int((ray < 0).sum())
        out["chi2"] = chi2_test(observed, expected / expected.sum(), alpha=alpha)
    return out
