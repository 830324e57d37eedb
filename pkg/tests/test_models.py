from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate
from scipy.special import ndtr

from maxcond.errors import ModelError
from maxcond.grid import make_grid
from maxcond.models import (MaxLinearModel, gaussian_kernel, indicator_kernel, make_log_gaussian_model,
                            make_max_linear_model, make_moving_max_model, power_variogram,
                            zero_variogram)


def test_toy_normalization(toy):
    np.testing.assert_allclose(toy.margin, 1.0, rtol=1e-12)
    np.testing.assert_allclose(toy.weights, [5 / 9, 5 / 9, 2 / 3], rtol=1e-10)
    assert toy.simple


def test_max_linear_joint_tail(toy):
    x = np.array([0.8, 2.0, 1.1])
    ref = sum(w * max(f / x) for w, f in zip(toy.weights, toy.profiles))
    assert toy.joint_tail([0, 1, 2], x) == pytest.approx(ref, rel=1e-14)
    assert toy.marginal_tail(1, 2.0) == pytest.approx(0.5)


def test_duplicate_sites_take_min(toy):
    assert toy.joint_tail([0, 0], [1.0, 3.0]) == toy.joint_tail([0], [1.0])


def test_infinite_threshold_ignored(toy):
    assert toy.joint_tail([0, 1], [2.0, np.inf]) == toy.joint_tail([0], [2.0])


def test_zero_profile_rejected():
    with pytest.raises(ModelError):
        make_max_linear_model(make_grid([0.0, 1.0]), [1, 1], [[1.0, 0.5], [0.0, 0.0]])


def test_normalization_impossible():
    # site 1 can only reach unit mass if the shared ray has weight 1, leaving none for site 0's own ray
    with pytest.raises(ModelError):
        make_max_linear_model(make_grid([0.0, 1.0]), [1, 1], [[1.0, 1.0], [1.0, 0.0]], normalize=True)


def test_log_gaussian_bivariate_tail(log_gauss):
    g = log_gauss.gamma[0, 1]
    assert log_gauss.joint_tail([0, 1], [1.0, 1.0]) == pytest.approx(2 * ndtr(np.sqrt(g) / 2), rel=1e-12)


def test_log_gaussian_density_matches_tail(log_gauss):
    """mu({f(0) >= a, f(1) >= b}) = tail(a) + tail(b) - tail(a, b) equals the integrated density."""
    a, b = 0.8, 1.7
    f = lambda v, u: log_gauss.joint_density([0, 1], [np.exp(u), np.exp(v)]) * np.exp(u + v)
    val, _ = integrate.dblquad(f, np.log(a), 30, np.log(b), 30, epsabs=1e-11)
    ref = 1 / a + 1 / b - log_gauss.joint_tail([0, 1], [a, b])
    assert val == pytest.approx(ref, rel=1e-5)


def test_log_gaussian_normalized_spectral_mean(log_gauss):
    rng = np.random.default_rng(0)
    Y = log_gauss.normalized_spectral(rng, 200_000)
    assert Y.max() <= log_gauss.series_bound + 1e-12
    np.testing.assert_allclose(Y.mean(axis=0), 1.0, atol=0.01)


def test_degenerate_variogram_is_single_ray():
    m = make_log_gaussian_model(make_grid([0.0, 1.0]), zero_variogram)
    assert isinstance(m, MaxLinearModel)
    assert m.q == 1


def test_non_psd_variogram_rejected():
    # gamma(h) = h^2 is valid; anything growing faster is not a variogram on a line
    bad = lambda h: (np.abs(np.asarray(h)[..., 0])) ** 3
    with pytest.raises(ModelError):
        make_log_gaussian_model(make_grid([0.0, 1.0, 2.0]), bad)


def test_power_variogram_bounds():
    with pytest.raises(ModelError):
        power_variogram(1.0, 2.5)


def test_moving_max_unit_margins(moving_max):
    for t in range(moving_max.m):
        assert moving_max.mean_spectral(t) == pytest.approx(1.0, rel=1e-9)
        assert moving_max.marginal_tail(t, 2.0) == pytest.approx(0.5, rel=1e-8)


def test_moving_max_bound(moving_max):
    rng = np.random.default_rng(1)
    Y = moving_max.normalized_spectral(rng, 10_000)
    assert Y.max() <= moving_max.series_bound


def test_moving_max_needs_1d():
    with pytest.raises(ModelError):
        make_moving_max_model(make_grid([[0, 0], [1, 1]]), indicator_kernel())


def test_moving_max_unknown_sup():
    from maxcond.models import ShiftKernel

    k = ShiftKernel("odd", lambda x: np.ones_like(np.asarray(x, float)), None, 1.0, 2.0)
    with pytest.raises(ModelError):
        make_moving_max_model(make_grid([0.0, 1.0]), k)


def test_gaussian_kernel_integral():
    k = gaussian_kernel(0.5, 4.0)
    val, _ = integrate.quad(lambda x: float(k.func(x)), -2, 2, epsabs=1e-13)
    assert val == pytest.approx(k.integral, rel=1e-10)
