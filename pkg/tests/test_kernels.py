from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from maxcond.errors import AcceptanceFloorError, CapacityError, InconsistentObservation, ModelError
from maxcond.grid import ObservationSet, make_grid
from maxcond.kernels import (conditional_cdf, nu_density, partition_log_weight, sample_extremal_block,
                             sample_subextremal, scenario_posterior, single_site_cdf_closed_form)
from maxcond.models import make_log_gaussian_model, make_max_linear_model, power_variogram, zero_variogram
from maxcond.oracle import ks_test
from maxcond.partitions import Partition
from maxcond.rng import stream


def test_k1_single_partition(log_gauss):
    obs = ObservationSet.on(log_gauss.grid, [1], [2.0])
    law = scenario_posterior(log_gauss, obs)
    assert law.pi.tolist() == [1.0]
    assert partition_log_weight(log_gauss, obs, Partition((0,))) == pytest.approx(np.log(1 / 4.0))


def test_two_ray_incompatible_block():
    m = make_max_linear_model(make_grid([0.0, 1.0]), [1, 1], [[1.0, 0.2], [0.2, 1.0]])
    obs = ObservationSet.on(m.grid, [0, 1], [1.0, 1.0])
    assert partition_log_weight(m, obs, Partition((0, 0))) == -np.inf
    w = partition_log_weight(m, obs, Partition((0, 1)))
    # block {0}: ray 1 only (ray 2 would put 5 at site 1); block {1}: ray 2 only
    assert w == pytest.approx(2 * np.log(1.0))
    law = scenario_posterior(m, obs)
    assert law.pi.tolist() == [0.0, 1.0]


def test_ray_pattern_gives_single_block():
    m = make_max_linear_model(make_grid([0.0, 1.0]), [1, 1], [[1.0, 0.2], [0.2, 1.0]])
    obs = ObservationSet.on(m.grid, [0, 1], [1.0, 0.2])
    law = scenario_posterior(m, obs)
    assert law.pi[0] == 1.0
    assert law.ref_dims.tolist() == [1, 2]


def test_toy_posterior_degenerate(toy, toy_obs):
    law = scenario_posterior(toy, toy_obs)
    assert law.pi.tolist() == [0.0, 1.0]
    ker = law.kernel((1,))
    below = ker.values[:, 0] < 1.3
    assert sorted(ker.rays[below].tolist()) == [1, 2]


def test_perfect_dependence():
    m = make_log_gaussian_model(make_grid([0.0, 1.0, 2.0]), zero_variogram)
    obs = ObservationSet.on(m.grid, [0, 2], [0.7, 0.7])
    law = scenario_posterior(m, obs)
    assert law.pi[0] == 1.0
    assert conditional_cdf(m, obs, [1], [0.69])[0] == 0.0
    assert conditional_cdf(m, obs, [1], [0.71])[0] == 1.0


def test_inconsistent_observation():
    m = make_log_gaussian_model(make_grid([0.0, 1.0, 2.0]), zero_variogram)
    obs = ObservationSet.on(m.grid, [0, 2], [0.7, 0.9])
    with pytest.raises(InconsistentObservation):
        scenario_posterior(m, obs)


def test_capacity_and_model_errors(moving_max):
    m = make_log_gaussian_model(make_grid(np.arange(8.0)), power_variogram())
    obs = ObservationSet.on(m.grid, range(7), np.ones(7))
    with pytest.raises(CapacityError):
        scenario_posterior(m, obs)
    with pytest.raises(ModelError):
        scenario_posterior(moving_max, ObservationSet.on(moving_max.grid, [0, 1], [1.0, 1.0]))


def test_nu_density_two_sites(log_gauss):
    """nu density equals the bivariate max-stable density -d2/dy1dy2 of exp(-V)."""
    y = np.array([0.9, 1.6])
    d = nu_density(log_gauss, ObservationSet.on(log_gauss.grid, [0, 1], y))
    V = lambda a, b: log_gauss.joint_tail([0, 1], [a, b])
    h = 1e-4
    F = lambda a, b: np.exp(-V(a, b))
    fd = (F(y[0] + h, y[1] + h) - F(y[0] + h, y[1] - h) - F(y[0] - h, y[1] + h) + F(y[0] - h, y[1] - h)) / (4 * h * h)
    assert d == pytest.approx(fd, rel=1e-4)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.2, 5.0), min_size=3, max_size=3), st.permutations([0, 1, 2]))
def test_posterior_permutation_invariance(y, perm):
    m = make_log_gaussian_model(make_grid([0.0, 1.0, 0.5]), power_variogram())
    obs = ObservationSet.on(m.grid, [0, 1, 2], y)
    law = scenario_posterior(m, obs)
    law_p = scenario_posterior(m, obs.permuted(perm))
    for tau, p in zip(law.partitions, law.pi):
        labels = [tau.rgs[i] for i in perm]
        from maxcond.partitions import partition_from_assignment

        q = law_p.pi[law_p.index(partition_from_assignment(labels))]
        assert abs(p - q) <= 2e-3 * max(p, 1e-3)
    assert abs(law.pi.sum() - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.permutations([0, 1]))
def test_posterior_permutation_invariance_k2_exact(a, b, perm):
    m = make_log_gaussian_model(make_grid([0.0, 1.0, 0.5]), power_variogram())
    obs = ObservationSet.on(m.grid, [0, 1], [a, b])
    pi = scenario_posterior(m, obs).pi
    pi_p = scenario_posterior(m, obs.permuted(perm)).pi
    np.testing.assert_allclose(pi, pi_p, rtol=1e-8, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_cdf_monotone_in_z(y0, y1):
    m = make_max_linear_model(make_grid([0.0, 1.0, 2.0]), np.ones(3),
                              [[1.0, 0.2, 0.3], [0.2, 1.0, 0.3], [0.5, 0.5, 1.0]], normalize=True)
    obs = ObservationSet.on(m.grid, [0, 1], [y0, y1])
    try:
        law = scenario_posterior(m, obs)
    except InconsistentObservation:
        return
    zs = np.geomspace(0.05, 50, 25)
    vals = [conditional_cdf(m, obs, [2], [z], law=law)[0] for z in zs]
    assert np.all(np.diff(vals) >= -1e-12)
    assert conditional_cdf(m, obs, [2], [np.inf], law=law)[0] == pytest.approx(1.0)


def test_cdf_at_conditioning_site(log_gauss):
    obs = ObservationSet.on(log_gauss.grid, [0, 1], [1.0, 1.5])
    below = conditional_cdf(log_gauss, obs, [2, 0], [1.2, 0.999])[0]
    assert below == 0.0
    above = conditional_cdf(log_gauss, obs, [2, 0], [1.2, 1.001])[0]
    alone = conditional_cdf(log_gauss, obs, [2], [1.2])[0]
    assert above == pytest.approx(alone, rel=1e-6)


def test_closed_form_matches_cdf(toy):
    obs = ObservationSet.on(toy.grid, [0], [1.3])
    law = scenario_posterior(toy, obs)
    for z in [0.2, 0.4, 0.8, 1.2, 3.0, 10.0]:
        a = single_site_cdf_closed_form(toy, 0, 1.3, [2], [z])
        b = conditional_cdf(toy, obs, [2], [z], law=law)[0]
        assert abs(a - b) <= 1e-10
    c = single_site_cdf_closed_form(toy, 0, 1.3, [1, 2], [0.9, 1.1])
    d = conditional_cdf(toy, obs, [1, 2], [0.9, 1.1], law=law)[0]
    assert abs(c - d) <= 1e-10


def test_extremal_block_k1_size_biased(log_gauss):
    """For k = 1 the block atom is y times a draw of the size-biased spectral law."""
    obs = ObservationSet.on(log_gauss.grid, [0], [2.0])
    law = scenario_posterior(log_gauss, obs)
    tau = law.partitions[0]
    atom = sample_extremal_block(law, tau, 0, stream(1, 0))
    assert atom.values[0] == 2.0
    draws = law.draw_block((0,), stream(1, 1), 10_000)[:, 1] / 2.0
    ref = np.sort(log_gauss.size_biased(0, stream(1, 2), 200_000)[:, 1])
    emp = lambda x: np.searchsorted(ref, x, side="right") / ref.size
    assert ks_test(draws, emp).passed


def test_full_block_has_no_rejection(log_gauss):
    obs = ObservationSet.on(log_gauss.grid, [0, 1], [1.0, 1.5])
    law = scenario_posterior(log_gauss, obs)
    assert law.complement_prob((0, 1)) == (1.0, 0.0)
    f = law.draw_block((0, 1), stream(2, 0), 5)
    assert np.all(f[:, [0, 1]] == [1.0, 1.5])


def test_acceptance_floor():
    m = make_log_gaussian_model(make_grid([0.0, 0.01]), power_variogram(1.0, 2.0))
    obs = ObservationSet.on(m.grid, [0, 1], [1.0, 1e-3])
    law = scenario_posterior(m, obs)
    with pytest.raises(AcceptanceFloorError):
        law.draw_block((0,), stream(0, 0), 10)


def test_subextremal_thinning_intensity(toy, toy_obs):
    """Mean number of atoms per ray with sup norm above L against the closed-form intensity."""
    law = scenario_posterior(toy, toy_obs)
    L = 0.05
    norms = toy.profiles.max(axis=1)
    counts = np.zeros(toy.q)
    n = 3_000
    for i in range(n):
        real = sample_subextremal(law, stream(3, i), threshold=L)
        for a in real.atoms:
            assert np.all(a.values[toy_obs.ids] < toy_obs.y)
            j = int(np.argmin(np.abs(toy.profiles / norms[:, None] - a.values / a.values.max()).sum(axis=1)))
            counts[j] += 1
    r_max = np.min(toy_obs.y / toy.profiles[:, toy_obs.ids], axis=1)
    expected = toy.weights * np.maximum(norms / L - 1 / r_max, 0)
    se = np.sqrt(expected / n)
    assert np.all(np.abs(counts / n - expected) <= 4 * se + 1e-9)


def test_subextremal_limits(toy):
    far = ObservationSet.on(toy.grid, [0], [1e-6])
    law = scenario_posterior(toy, far)
    empty = sum(len(sample_subextremal(law, stream(4, i), threshold=0.5)) == 0 for i in range(200))
    assert empty == 200
