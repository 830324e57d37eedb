from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfc
from scipy.stats import multivariate_normal

from maxcond.errors import AccuracyError, CapacityError
from maxcond.mvn import MvnProblem, mvn_cdf, norm_cdf_dim


@pytest.mark.parametrize("x", [-8.0, -1.3, 0.0, 0.7, 5.0])
def test_dim1_exact(x):
    p, se = norm_cdf_dim([x], [[1.0]])
    assert abs(p - 0.5 * erfc(-x / np.sqrt(2))) <= 1e-12
    assert se == 0.0


def test_identity_quadrant():
    p, _ = norm_cdf_dim([0.0, 0.0], np.eye(2))
    assert abs(p - 0.25) < 1e-12


def test_equicorrelated_orthant():
    cov = np.full((3, 3), 0.5) + 0.5 * np.eye(3)
    p, se = norm_cdf_dim([0, 0, 0], cov, rtol=1e-4)
    assert abs(p - 0.25) <= max(3 * se, 1e-4)


def test_deterministic_under_seed():
    cov = np.full((4, 4), 0.3) + 0.7 * np.eye(4)
    prob = MvnProblem(np.zeros(4), cov, np.array([0.1, -0.2, 0.5, 1.0]))
    assert mvn_cdf(prob, seed=3) == mvn_cdf(prob, seed=3)


def test_infinite_limits():
    cov = np.eye(3)
    assert norm_cdf_dim([np.inf, np.inf, 0.0], cov)[0] == pytest.approx(0.5, abs=1e-12)
    assert norm_cdf_dim([-np.inf, 1.0, 0.0], cov)[0] == 0.0


def test_errors():
    with pytest.raises(CapacityError):
        MvnProblem(np.zeros(7), np.eye(7), np.zeros(7))
    with pytest.raises(ValueError):
        MvnProblem(np.zeros(2), [[1.0, 2.0], [2.0, 1.0]], np.zeros(2))
    with pytest.raises(ValueError):
        MvnProblem(np.zeros(2), [[1.0, 0.5], [0.0, 1.0]], np.zeros(2))


def test_accuracy_error():
    cov = np.full((5, 5), 0.9) + 0.1 * np.eye(5)
    prob = MvnProblem(np.zeros(5), cov, np.full(5, -3.0), rtol=1e-12, atol=0)
    with pytest.raises(AccuracyError) as info:
        mvn_cdf(prob, n_max=2048)
    assert info.value.achieved > 0


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.95, 0.95), st.floats(-3, 3), st.floats(-3, 3))
def test_dim2_matches_scipy(rho, a, b):
    cov = np.array([[1.0, rho], [rho, 1.0]])
    p, _ = norm_cdf_dim([a, b], cov)
    ref = multivariate_normal(np.zeros(2), cov).cdf([a, b])
    assert abs(p - ref) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 6), st.floats(0.0, 0.8), st.floats(-1.0, 1.5))
def test_exchangeable_closed_form(d, rho, b):
    """P(X < b) for equicorrelated X equals E[Phi((b - sqrt(rho) Z)/sqrt(1-rho))^d]."""
    from scipy import integrate
    from scipy.special import ndtr

    cov = np.full((d, d), rho) + (1 - rho) * np.eye(d)
    p, se = norm_cdf_dim(np.full(d, b), cov, rtol=1e-4)
    f = lambda z: np.exp(-z * z / 2) / np.sqrt(2 * np.pi) * ndtr((b - np.sqrt(rho) * z) / np.sqrt(1 - rho)) ** d
    ref, _ = integrate.quad(f, -12, 12, epsabs=1e-13)
    assert abs(p - ref) <= max(4 * se, 3e-4 * ref)
