"""Acceptance suite: criteria 1-10 as reproducible checks.

Every criterion returns a list of TestReport objects.  Sample sizes are the
nominal ones multiplied by ``scale`` (with small floors), so the suite can be
run quickly for smoke tests and at full size for acceptance.  All random
streams derive from the suite seed and the criterion number; the report holds
no timings, so two runs with the same seed write identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.special import erfc, roots_legendre

from maxcond.config import ModelSpec, config_hash, load_model_spec
from maxcond.errors import ConfigError, InvariantViolation, MaxCondError
from maxcond.grid import ObservationSet
from maxcond.kernels import conditional_cdf, nu_density, scenario_posterior, single_site_cdf_closed_form
from maxcond.models import DISCRETE
from maxcond.mvn import MvnProblem, mvn_cdf
from maxcond.oracle import (BandSpec, TestReport, empirical_cdf, ks_test, reject_condition,
                            se_check)
from maxcond.partitions import bell_number, enumerate_partitions, scenario_from_realization
from maxcond.rng import stream
from maxcond.samplers import (check_decomposition, decompose, extremal_function_distribution_check,
                              sample_conditional, simulate_fields, simulate_realizations)

BELL = [1, 2, 5, 15, 52, 203, 877, 4140]
BANDS = (0.02, 0.04)
JUMP_GAP = 0.06
PLAN_KEYS = {"toy", "line", "log_gaussian", "moving_max", "raw_draws", "moving_max_raw_draws",
             "realizations", "conditional_samples"}


@dataclass
class ValidationPlan:
    specs: dict[str, ModelSpec]
    raw_draws: int = 10_000_000
    moving_max_raw_draws: int = 2_000_000
    realizations: int = 10_000
    conditional_samples: int = 100_000
    text: str = ""

    @property
    def hash(self) -> str:
        return config_hash(self.text, *(self.specs[k].text for k in sorted(self.specs)))


def load_plan(path) -> ValidationPlan:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("validation plan not found", 0, str(path))
    text = path.read_text()
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("invalid YAML", mark.line + 1 if mark else 0, str(path)) from None
    lines = {ln.split(":")[0].strip(): i + 1 for i, ln in enumerate(text.splitlines()) if ":" in ln}
    for k in raw:
        if k not in PLAN_KEYS:
            raise ConfigError(f"unknown key '{k}'", lines.get(k), str(path))
    specs = {}
    for name in ("toy", "line", "log_gaussian", "moving_max"):
        if name not in raw:
            raise ConfigError(f"missing key '{name}'", None, str(path))
        specs[name] = load_model_spec(path.parent / raw[name])
        if specs[name].obs is None or specs[name].held_out is None:
            raise ConfigError(f"{name}: observations and held_out required", lines.get(name), str(path))
    sizes = {}
    for k in ("raw_draws", "moving_max_raw_draws", "realizations", "conditional_samples"):
        if k in raw:
            v = raw[k]
            if not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{k} must be a positive integer", lines.get(k), str(path))
            sizes[k] = v
    return ValidationPlan(specs, text=text, **sizes)


@dataclass
class Context:
    plan: ValidationPlan
    seed: int
    scale: float = 1.0
    threads: int = 1
    bands: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)

    def n(self, base: int, minimum: int) -> int:
        return max(minimum, int(round(base * self.scale)))

    def rng(self, *key: int) -> np.random.Generator:
        return stream(self.seed, *key)

    def sub_seed(self, *key: int) -> int:
        ss = np.random.SeedSequence(self.seed, spawn_key=key)
        return int(ss.generate_state(1, dtype=np.uint32)[0])

    def band(self, name: str, obs: ObservationSet, n_raw: int, key: tuple):
        """Band rejection at the widest band; narrower bands are restrictions of it."""
        tag = (name, tuple(obs.ids.tolist()), tuple(obs.y.tolist()), n_raw)
        if tag not in self.bands:
            model = self.plan.specs[name].model
            wide = reject_condition(model, obs, BandSpec(obs.y, max(BANDS)), n_raw,
                                    seed=self.sub_seed(*key), threads=self.threads)
            self.bands[tag] = {eps: wide.restrict(BandSpec(obs.y, eps)) for eps in BANDS}
        return self.bands[tag]


def _report(name, passed, statistic=0.0, tol=0.0, n=0, detail="") -> TestReport:
    return TestReport(name, float(statistic), None, int(n), bool(passed), float(tol), detail)


# ----------------------------------------------------------------------------


def criterion_1(ctx: Context) -> list[TestReport]:
    """Decomposition identities on exact realizations."""
    out = []
    n = ctx.n(ctx.plan.realizations, 200)
    for mi, name in enumerate(("line", "moving_max")):
        model = ctx.plan.specs[name].model
        reals, _ = simulate_realizations(model, ctx.rng(1, mi), n)
        m = model.m
        sets = {k: np.unique(np.linspace(0, m - 1, k).round().astype(int)) for k in (1, 2, 4)}
        for k, K in sets.items():
            bad, scen_bad = 0, 0
            for real in reals:
                dec = decompose(real, K)
                if check_decomposition(real, dec):
                    bad += 1
                    continue
                scen = scenario_from_realization(dec.extremal, K)
                if len(scen.partition) != len(dec.extremal):
                    scen_bad += 1
            out.append(_report(f"c1.{name}.k{k}.identities", bad == 0, bad, 0, n,
                               f"violations={bad}"))
            out.append(_report(f"c1.{name}.k{k}.scenario_blocks", scen_bad == 0, scen_bad, 0, n,
                               f"violations={scen_bad}"))
        sub_bad = 0
        for real in reals:
            one = {id(a) for a in decompose(real, [0]).extremal.atoms}
            full = {id(a) for a in decompose(real, np.arange(m)).extremal.atoms}
            sub_bad += not one <= full
        out.append(_report(f"c1.{name}.inclusion", sub_bad == 0, sub_bad, 0, n,
                           f"violations={sub_bad}"))
    return out


def criterion_2(ctx: Context) -> list[TestReport]:
    """A single extremal function at one site, unit Frechet at that site."""
    out = []
    n = ctx.n(ctx.plan.realizations, 200)
    for mi, name in enumerate(("toy", "moving_max", "log_gaussian")):
        model = ctx.plan.specs[name].model
        try:
            res = extremal_function_distribution_check(model, 0, n, ctx.rng(2, mi))
        except InvariantViolation as exc:
            out.append(_report(f"c2.{name}.count", False, detail=str(exc)))
            continue
        ok = res["extremal_count_min"] == 1 == res["extremal_count_max"]
        out.append(_report(f"c2.{name}.count", ok, res["extremal_count_max"], 1, n,
                           f"min={res['extremal_count_min']} max={res['extremal_count_max']}"))
        ks = res["ks"]
        ks.name = f"c2.{name}.frechet_ks"
        out.append(ks)
        if "chi2" in res:
            chi = res["chi2"]
            chi.name = f"c2.{name}.ray_frequencies"
            out.append(chi)
    return out


def criterion_3(ctx: Context) -> list[TestReport]:
    counts = [len(enumerate_partitions(k)) for k in range(1, 9)]
    bells = [bell_number(k) for k in range(1, 9)]
    return [_report("c3.bell_counts", counts == BELL and bells == BELL, 0, 0, 8,
                    f"counts={counts}")]


def criterion_4(ctx: Context) -> list[TestReport]:
    """Posterior over hitting scenarios against band rejection frequencies."""
    out = []
    n_raw = ctx.n(ctx.plan.raw_draws, 10_000)
    for mi, name in enumerate(("toy", "log_gaussian")):
        spec = ctx.plan.specs[name]
        law = scenario_posterior(spec.model, spec.obs)
        bands = ctx.band(name, spec.obs, n_raw, (4, mi))
        for tau, pi in zip(law.partitions, law.pi):
            rgs = tau.to_string()
            f2, se2 = bands[0.02].scenario_frequency(rgs)
            f4, se4 = bands[0.04].scenario_frequency(rgs)
            rep = se_check(f"c4.{name}.pi[{rgs}].band0.02", f2, pi, se2, n=bands[0.02].n_accepted)
            out.append(rep)
            e2, e4 = abs(f2 - pi), abs(f4 - pi)
            ok = e4 + 3 * se4 >= e2
            out.append(_report(f"c4.{name}.pi[{rgs}].bias_direction", ok, e4 - e2, 3 * se4,
                               bands[0.04].n_accepted,
                               f"err0.02={e2:.4g} err0.04={e4:.4g} se0.04={se4:.3g}"))
    return out


def _jumps(law, s: int) -> np.ndarray:
    vals = []
    for tau, pi in zip(law.partitions, law.pi):
        if pi > 0:
            for b in tau.blocks:
                ker = law.kernel(b)
                if hasattr(ker, "values"):
                    vals.extend(ker.values[:, s].tolist())
    return np.unique(np.array(vals)) if vals else np.zeros(0)


def query_points(samples: np.ndarray, jumps: np.ndarray) -> np.ndarray:
    """Nine empirical quantiles of the continuous part, moved at least JUMP_GAP (relative) away from atoms of the law."""
    cont = samples[~np.isin(samples, jumps)] if jumps.size else samples
    if cont.size < 100:
        cont = samples
    z = np.quantile(cont, np.linspace(0.1, 0.9, 9))
    for j in jumps:
        near = np.abs(z - j) < JUMP_GAP * j
        z[near] = np.where(z[near] >= j, j * (1 + JUMP_GAP), j * (1 - JUMP_GAP))
    return z


def _cdf_checks(ctx, tag, model, obs, s, z, samples, oracle_vals, law):
    out = []
    rows = []
    for zi in z:
        c, se_c = conditional_cdf(model, obs, [s], [zi], law=law)
        e, se_e = empirical_cdf(samples, zi)
        o, se_o = empirical_cdf(oracle_vals, zi)
        out.append(se_check(f"{tag}.z={zi:.4g}.sampler", e, c, np.hypot(se_e, se_c), n=samples.size))
        out.append(se_check(f"{tag}.z={zi:.4g}.oracle", o, c, np.hypot(se_o, se_c), n=oracle_vals.size))
        rows.append((zi, c, e, o))
    ctx.curves[tag] = np.array(rows)
    return out


def criterion_5(ctx: Context) -> list[TestReport]:
    """Conditional CDF at a held-out site against the sampler and the band oracle."""
    out = []
    n_c = ctx.n(ctx.plan.conditional_samples, 2_000)
    for mi, name in enumerate(("toy", "log_gaussian", "moving_max")):
        spec = ctx.plan.specs[name]
        model, obs, s = spec.model, spec.obs, spec.held_out
        n_raw = ctx.n(ctx.plan.moving_max_raw_draws if name == "moving_max" else ctx.plan.raw_draws,
                      10_000)
        key = (5, mi) if name == "moving_max" else (4, mi)
        band = ctx.band(name, obs, n_raw, key)[0.02]
        law = scenario_posterior(model, obs)
        samples = sample_conditional(model, obs, ctx.rng(5, 10 + mi), n_c, law=law)[:, s]
        jumps = _jumps(law, s) if model.kind == DISCRETE else np.zeros(0)
        z = query_points(samples, jumps)
        out += _cdf_checks(ctx, f"c5.{name}", model, obs, s, z, samples, band.fields[:, s], law)
    return out


def criterion_6(ctx: Context) -> list[TestReport]:
    """Single-site conditioning: closed form, conditional_cdf and oracle."""
    spec = ctx.plan.specs["toy"]
    model, s = spec.model, spec.held_out
    t, y = int(spec.obs.ids[0]), float(spec.obs.y[0])
    obs = ObservationSet.on(model.grid, [t], [y])
    law = scenario_posterior(model, obs)
    n_c = ctx.n(ctx.plan.conditional_samples, 2_000)
    samples = sample_conditional(model, obs, ctx.rng(6, 0), n_c, law=law)[:, s]
    z = query_points(samples, _jumps(law, s))
    band = ctx.band("toy", obs, ctx.n(ctx.plan.raw_draws, 10_000), (6, 0))[0.02]
    out = []
    worst = 0.0
    for zi in z:
        closed = single_site_cdf_closed_form(model, t, y, [s], [zi])
        c, _ = conditional_cdf(model, obs, [s], [zi], law=law)
        worst = max(worst, abs(closed - c))
        o, se_o = empirical_cdf(band.fields[:, s], zi)
        out.append(se_check(f"c6.toy.z={zi:.4g}.oracle", o, closed, se_o, n=band.n_accepted))
    out.insert(0, _report("c6.toy.closed_form_vs_cdf", worst <= 1e-10, worst, 1e-10, z.size))
    ctx.curves["c6.toy"] = np.array([(zi, single_site_cdf_closed_form(model, t, y, [s], [zi]),
                                      empirical_cdf(samples, zi)[0],
                                      empirical_cdf(band.fields[:, s], zi)[0]) for zi in z])
    return out


def criterion_7(ctx: Context) -> list[TestReport]:
    """Conditional samples reproduce the observations bitwise."""
    out = []
    n = ctx.n(10_000, 500)
    for mi, name in enumerate(("toy", "line", "log_gaussian", "moving_max")):
        spec = ctx.plan.specs[name]
        try:
            f = sample_conditional(spec.model, spec.obs, ctx.rng(7, mi), n)
            bad = int(np.sum(np.any(f[:, spec.obs.ids] != spec.obs.y, axis=1)))
        except InvariantViolation:
            bad = n
        out.append(_report(f"c7.{name}.exact_constraints", bad == 0, bad, 0, n, f"violations={bad}"))
    return out


def nu_integral(model, ids, lo: float = -6.0, hi: float = 18.0, nodes: int = 16,
                panels: int = 8) -> float:
    """Integral of the nu_t density over (0, inf)^2 by Gauss-Legendre in log coordinates."""
    x, w = roots_legendre(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    u = np.concatenate([(b - a) / 2 * x + (a + b) / 2 for a, b in zip(edges[:-1], edges[1:])])
    wu = np.concatenate([(b - a) / 2 * w for a, b in zip(edges[:-1], edges[1:])])
    total = 0.0
    for ui, wi in zip(u, wu):
        for vj, wj in zip(u, wu):
            y = np.exp([ui, vj])
            d = nu_density(model, ObservationSet.on(model.grid, ids, y))
            total += wi * wj * d * y[0] * y[1]
    return total


def criterion_8(ctx: Context) -> list[TestReport]:
    """Posterior normalization and total mass of the nu_t density."""
    out = []
    for mi, name in enumerate(("toy", "line", "log_gaussian", "moving_max")):
        spec = ctx.plan.specs[name]
        model, ids = spec.model, spec.obs.ids
        eta, _ = simulate_fields(model, ctx.rng(8, mi), 100)
        worst, bell_ok = 0.0, True
        for row in eta:
            law = scenario_posterior(model, ObservationSet.on(model.grid, ids, row[ids]))
            worst = max(worst, abs(law.pi.sum() - 1.0))
            bell_ok &= law.pi.size == bell_number(ids.size) and bool(np.all(law.pi >= 0))
        out.append(_report(f"c8.{name}.pi_sum", worst <= 1e-10 and bell_ok, worst, 1e-10, 100))
    lg = ctx.plan.specs["log_gaussian"]
    nodes = 16 if ctx.scale >= 0.1 else 10
    total = nu_integral(lg.model, lg.obs.ids, nodes=nodes)
    out.append(_report("c8.log_gaussian.nu_mass", abs(total - 1) <= 1e-3, abs(total - 1), 1e-3,
                       (8 * nodes) ** 2, f"integral={total:.8f}"))
    return out


def criterion_9(ctx: Context) -> list[TestReport]:
    xs = np.linspace(-8, 8, 161)
    err = max(abs(mvn_cdf(MvnProblem([0.0], [[1.0]], [x]))[0] - 0.5 * erfc(-x / np.sqrt(2)))
              for x in xs)
    out = [_report("c9.mvn.dim1_vs_erf", err <= 1e-12, err, 1e-12, xs.size)]
    cov = np.full((3, 3), 0.5) + 0.5 * np.eye(3)
    p, se = mvn_cdf(MvnProblem(np.zeros(3), cov, np.zeros(3), rtol=1e-4))
    n = ctx.n(10_000_000, 100_000)
    rng = ctx.rng(9, 0)
    L = np.linalg.cholesky(cov)
    hits = 0
    for c in range(0, n, 1_000_000):
        m = min(1_000_000, n - c)
        x = rng.standard_normal((m, 3)) @ L.T
        hits += int(np.all(x < 0, axis=1).sum())
    q = hits / n
    se_mc = np.sqrt(q * (1 - q) / n)
    tol = 3 * np.hypot(se, se_mc)
    out.append(TestReport("c9.mvn.dim3_vs_mc", abs(p - q), None, n, bool(abs(p - q) <= tol), tol,
                          f"qmc={p:.6f} mc={q:.6f}"))
    return out


def criterion_10(ctx: Context) -> list[TestReport]:
    """Two in-process runs of a reduced suite give identical serialized reports."""
    texts = []
    for _ in range(2):
        sub = Context(ctx.plan, ctx.seed, scale=min(ctx.scale, 1.0) * 0.001, threads=ctx.threads)
        reps = []
        for c in (1, 4, 7):
            reps += CRITERIA[c](sub)
        texts.append("\n".join(r.to_json() for r in reps))
    same = texts[0] == texts[1]
    return [_report("c10.reproducible_reports", same, 0 if same else 1, 0, len(texts[0]))]


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}


def run_validation(ctx: Context, only=None) -> list[tuple[int, TestReport]]:
    results = []
    for c, fn in CRITERIA.items():
        if only is not None and c not in only:
            continue
        try:
            reps = fn(ctx)
        except MaxCondError as exc:
            reps = [_report(f"c{c}.error", False, detail=f"{type(exc).__name__}: {exc}")]
        results += [(c, r) for r in reps]
    return results


def report_lines(ctx: Context, results) -> list[str]:
    head = {"config_hash": ctx.plan.hash, "seed": ctx.seed, "scale": ctx.scale}
    lines = [json.dumps(head, sort_keys=True)]
    for c, r in results:
        d = json.loads(r.to_json())
        d["criterion"] = c
        lines.append(json.dumps(d, sort_keys=True))
    return lines


def summarize(results) -> dict[int, bool]:
    out: dict[int, bool] = {}
    for c, r in results:
        out[c] = out.get(c, True) and r.passed
    return out
