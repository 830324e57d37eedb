"""Brute-force reference values: band rejection conditioning and test statistics.

This module deliberately does not import ``maxcond.kernels``.  Ground truth
comes only from unconditional simulation (``samplers``) and the model
definitions, so no formula is shared with the quantities it checks.

Raw draws are produced in fixed-size chunks; chunk ``c`` uses the stream
``(seed, 7, c)``.  Results are concatenated in chunk order, so the output does
not depend on the number of worker threads.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from maxcond.errors import AcceptanceFloorError
from maxcond.grid import ObservationSet
from maxcond.models import SpectralModel
from maxcond.partitions import partition_from_assignment
from maxcond.rng import chunk_sizes, stream
from maxcond.samplers import simulate_fields

DEFAULT_CHUNK = 100_000


@dataclass(frozen=True)
class BandSpec:
    center: np.ndarray
    eps: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        if self.eps <= 0:
            raise ValueError("band half-width must be positive")
        if np.any(c <= 0):
            raise ValueError("band center must be positive")

    @property
    def lower(self) -> np.ndarray:
        return self.center * max(1.0 - self.eps, 0.0)

    @property
    def upper(self) -> np.ndarray:
        return self.center * (1.0 + self.eps)

    def contains(self, v: np.ndarray) -> np.ndarray:
        v = np.atleast_2d(v)
        return np.all((v > self.lower) & (v < self.upper), axis=1)


@dataclass
class TestReport:
    name: str
    statistic: float
    p_value: float | None
    n_effective: int
    passed: bool
    tolerance: float
    detail: str = ""

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, sort_keys=True, default=float)


@dataclass
class BandResult:
    fields: np.ndarray
    labels: np.ndarray          # per accepted sample, argmax-atom label at each conditioning site
    n_raw: int
    n_accepted: int
    ids: np.ndarray | None = None

    @property
    def rate(self) -> float:
        return self.n_accepted / self.n_raw

    def restrict(self, band: BandSpec) -> "BandResult":
        """Accepted samples that also fall in a narrower band."""
        ok = band.contains(self.fields[:, self.ids])
        return BandResult(self.fields[ok], self.labels[ok], self.n_raw, int(ok.sum()), self.ids)

    def scenarios(self) -> list[str]:
        return [partition_from_assignment(row).to_string() for row in self.labels]

    def scenario_frequency(self, rgs: str) -> tuple[float, float]:
        if self.n_accepted == 0:
            return float("nan"), float("nan")
        hits = np.array([s == rgs for s in self.scenarios()])
        p = hits.mean()
        return float(p), float(np.sqrt(max(p * (1 - p), 0.0) / self.n_accepted))


def _band_chunk(model, obs, band, seed, c, n, opts):
    rng = stream(seed, 7, c)
    eta, lab = simulate_fields(model, rng, n, opts)
    ok = band.contains(eta[:, obs.ids])
    return eta[ok], lab[ok][:, obs.ids]


def reject_condition(model: SpectralModel, obs: ObservationSet, band: BandSpec, n_raw: int,
                     seed: int, threads: int = 1, chunk: int = DEFAULT_CHUNK, opts=None) -> BandResult:
    """Unconditional fields whose values at the conditioning sites fall in the band."""
    if n_raw < 10_000:
        raise ValueError("n_raw must be at least 1e4")
    sizes = chunk_sizes(n_raw, chunk)
    work = lambda c: _band_chunk(model, obs, band, seed, c, sizes[c], opts)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, range(len(sizes))))
    else:
        parts = [work(c) for c in range(len(sizes))]
    fields = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    if fields.shape[0] == 0:
        raise AcceptanceFloorError(0.0, 1.0 / n_raw, "band rejection: no acceptances, widen the band")
    return BandResult(fields, labels, n_raw, fields.shape[0], obs.ids)


def empirical_cdf(values: np.ndarray, z: float) -> tuple[float, float]:
    """P(X < z) with its binomial standard error."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    p = float(np.mean(values < z))
    return p, float(np.sqrt(max(p * (1 - p), 0.0) / values.size))


def ks_test(samples, cdf, alpha: float = 0.01, name: str = "ks") -> TestReport:
    """One-sample Kolmogorov-Smirnov test with exact critical values."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max((i / n - F).max(), (F - (i - 1) / n).max()))
    p = float(stats.kstwo.sf(d, n))
    crit = float(stats.kstwo.isf(alpha, n))
    return TestReport(name, d, p, n, d <= crit, crit, f"alpha={alpha}")


def chi2_test(observed, expected_probs, alpha: float = 0.01, name: str = "chi2") -> TestReport:
    obs = np.asarray(observed, dtype=float)
    p = np.asarray(expected_probs, dtype=float)
    n = obs.sum()
    if np.any((p == 0) & (obs > 0)):
        return TestReport(name, float("inf"), 0.0, int(n), False, alpha, "count in a null cell")
    live = p > 0
    exp = n * p[live] / p[live].sum()
    stat, pv = stats.chisquare(obs[live], exp)
    return TestReport(name, float(stat), float(pv), int(n), bool(pv > alpha), alpha,
                      f"cells={int(live.sum())}")


def independence_test(a, b, alpha: float = 0.01, name: str = "independence") -> TestReport:
    """Chi-square test of independence for two label arrays (sparse columns pooled)."""
    a = np.asarray(a)
    b = np.asarray(b)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size))
    np.add.at(table, (ia, ib), 1)
    table = table[table.sum(axis=1) > 0]
    # pool columns until every expected count is at least 5
    while table.shape[1] > 2:
        exp = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
        if exp.min() >= 5:
            break
        table = np.column_stack([table[:, :-2], table[:, -2:].sum(axis=1)])
    if table.shape[0] < 2 or table.shape[1] < 2:
        return TestReport(name, 0.0, 1.0, int(a.size), True, alpha, "degenerate table")
    stat, pv, dof, _ = stats.chi2_contingency(table)
    return TestReport(name, float(stat), float(pv), int(a.size), bool(pv > alpha), alpha,
                      f"table={table.shape[0]}x{table.shape[1]}")


def se_check(name: str, estimate: float, target: float, se: float,
             floor: float = 0.01, n: int = 0) -> TestReport:
    """|estimate - target| <= max(3 se, floor)."""
    tol = max(3.0 * se, floor) if np.isfinite(se) else floor
    dist = abs(estimate - target)
    return TestReport(name, dist, None, n, bool(dist <= tol), tol,
                      f"estimate={estimate:.6g} target={target:.6g} se={se:.3g}")
