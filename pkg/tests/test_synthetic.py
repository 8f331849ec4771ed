"""Ground-truth fixture model: every information route equals n * C."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from emfim import QuadraticModel, louis_fim, master_rng
from oracles import fd_gradient, fd_hessian

CURV = np.array([[2.0, 0.5], [0.5, 1.5]])


def test_curvature_validation():
    with pytest.raises(ValueError):
        QuadraticModel([[1.0, 2.0], [0.5, 1.0]])  # asymmetric
    with pytest.raises(ValueError):
        QuadraticModel([[1.0, 2.0], [2.0, 1.0]])  # indefinite


def test_score_is_loglik_gradient():
    model = QuadraticModel(CURV)
    data = model.sample_data(np.array([0.5, -0.2]), 40, master_rng(0))
    theta = np.array([0.8, 0.1])
    fd = fd_gradient(lambda t: model.loglik(t, data), theta, h=1e-6)
    assert_allclose(model.score(theta, data), fd, rtol=1e-6, atol=1e-6)


def test_em_map_jumps_to_sample_mean():
    model = QuadraticModel(CURV)
    data = model.sample_data(np.array([0.5, -0.2]), 40, master_rng(0))
    ybar = data.payload.mean(axis=0)
    assert_allclose(model.em_map(np.array([5.0, 5.0]), data), ybar, rtol=0, atol=0)
    assert model.loglik(ybar, data) >= model.loglik(np.array([0.5, -0.2]), data)


def test_information_routes_agree():
    model = QuadraticModel(CURV)
    data = model.sample_data(np.array([0.0, 0.0]), 15, master_rng(1))
    expected = 15 * CURV
    assert_allclose(louis_fim(model, np.array([0.1, 0.2]), data), expected, rtol=1e-9)
    hess = fd_hessian(lambda t: model.loglik(t, data), np.array([0.1, 0.2]), h=1e-3)
    assert_allclose(-hess, expected, rtol=1e-6)


def test_sampling_covariance_matches_inverse_curvature():
    model = QuadraticModel(CURV)
    data = model.sample_data(np.zeros(2), 200000, master_rng(4))
    cov = np.cov(data.payload.T)
    assert_allclose(cov, np.linalg.inv(CURV), atol=0.02)
