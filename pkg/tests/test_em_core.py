"""EM driver and model-interface contracts, exercised through the mixture."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from emfim import Dataset, EMConfig, GaussianMixture, InvalidParameterError, master_rng, run_em
from conftest import GMM_THETA0, GMM_TRUTH

from oracles import fd_gradient


def test_dataset_requires_observations():
    with pytest.raises(ValueError):
        Dataset(payload=np.array([]), n=0)


def test_dataset_payload_immutable(gmm_data):
    with pytest.raises(ValueError):
        gmm_data.payload[0] = 1.0


@pytest.mark.parametrize("delta,max_iterations", [(0.0, 10), (-1e-3, 10), (1e-8, 0)])
def test_em_config_validation(delta, max_iterations):
    with pytest.raises(ValueError):
        EMConfig(delta=delta, max_iterations=max_iterations)


def test_run_em_validates_start(gmm_model, gmm_data):
    with pytest.raises(InvalidParameterError):
        run_em(gmm_model, gmm_data, np.array([1.5, 0.0, 1.0]))


def test_converges_near_truth(gmm_fit):
    assert gmm_fit.converged
    assert np.all(np.abs(gmm_fit.theta_star - GMM_TRUTH) < 0.15)
    # published run of this experiment took 54 iterations; same ballpark
    assert 20 <= gmm_fit.iterations <= 100


def test_trace_shapes_and_convergence_gap(gmm_fit):
    assert gmm_fit.iterates.shape == (gmm_fit.iterations + 1, 3)
    assert len(gmm_fit.objectives) == gmm_fit.iterations + 1
    assert abs(gmm_fit.objectives[-1] - gmm_fit.objectives[-2]) < 1e-8


def test_loglik_sequence_nondecreasing(gmm_fit):
    diffs = np.diff(gmm_fit.objectives)
    assert np.all(diffs >= -1e-12)


def test_fixed_point_start_converges_immediately(gmm_model, gmm_data, gmm_theta_star):
    trace = run_em(gmm_model, gmm_data, gmm_theta_star, EMConfig(delta=1e-8))
    assert trace.converged
    assert trace.iterations <= 2


def test_em_map_fixed_point_residual(gmm_model, gmm_data, gmm_fit):
    theta_star = gmm_fit.theta_star
    last_step = np.abs(gmm_fit.iterates[-1] - gmm_fit.iterates[-2]).max()
    residual = np.abs(gmm_model.em_map(theta_star, gmm_data) - theta_star).max()
    assert residual <= 10.0 * max(last_step, 1e-8)


def test_nonconvergence_returns_trace(gmm_model, gmm_data):
    trace = run_em(gmm_model, gmm_data, GMM_THETA0, EMConfig(delta=1e-8, max_iterations=3))
    assert not trace.converged
    assert trace.iterations == 3


def test_score_matches_q_gradient_at_random_points(gmm_model, gmm_data):
    rng = master_rng(17)
    for _ in range(20):
        theta_cond = np.array(
            [rng.uniform(0.2, 0.8), rng.uniform(-2.0, 4.0), rng.uniform(-2.0, 4.0)]
        )
        direct = gmm_model.score(theta_cond, gmm_data)
        fd = fd_gradient(lambda t: gmm_model.q_value(t, theta_cond, gmm_data), theta_cond, h=1e-5)
        assert_allclose(fd, direct, rtol=1e-5, atol=1e-7)


def test_score_norm_shrinks_with_delta(gmm_model, gmm_data):
    norms = []
    for delta in (1e-4, 1e-8, 1e-12):
        trace = run_em(gmm_model, gmm_data, GMM_THETA0, EMConfig(delta=delta))
        assert trace.converged
        norms.append(np.abs(gmm_model.score(trace.theta_star, gmm_data)).max())
    assert norms[0] >= norms[1] >= norms[2]


class _NoLoglikMixture(GaussianMixture):
    """Mixture with the log-likelihood capability switched off, to drive the
    Q-difference stopping rule."""

    has_loglik = False

    def loglik(self, theta, data):
        raise AssertionError("objective must not touch the log-likelihood")


def test_q_difference_stopping_rule(gmm_model, gmm_data):
    start = np.array([0.4, 2.0, 1.0])
    reference = run_em(gmm_model, gmm_data, start, EMConfig(delta=1e-8))
    trace = run_em(_NoLoglikMixture(), gmm_data, start, EMConfig(delta=1e-8))
    assert trace.converged
    # one Q value per step, not per iterate
    assert len(trace.objectives) == trace.iterations
    assert np.abs(trace.theta_star - reference.theta_star).max() < 1e-4
