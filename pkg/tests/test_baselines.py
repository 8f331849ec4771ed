"""Louis, Oakes, supplemented-EM, and map-Jacobian probes."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from emfim import (
    CoordinateDegenerateError,
    EMTrace,
    PerturbationOutOfDomainError,
    QuadraticModel,
    StabilizationError,
    UnsupportedCapabilityError,
    benchmark_spec,
    fd_dm,
    louis_fim,
    master_rng,
    oakes_fim,
    sem_dm,
    sem_fim,
    spectral_rel_error,
    spsa_dm,
)
from emfim.baselines import DMEstimate
from emfim.em import Dataset, EMModel
from emfim.ssm import DiagonalNoiseStateSpace

from oracles import fd_hessian


def test_louis_matches_loglik_hessian(gmm_model, gmm_data, gmm_theta_star):
    louis = louis_fim(gmm_model, gmm_theta_star, gmm_data)
    h = 1e-4 * np.maximum(1.0, np.abs(gmm_theta_star))
    fd = -fd_hessian(lambda t: gmm_model.loglik(t, gmm_data), gmm_theta_star, h)
    assert spectral_rel_error(louis, fd) <= 1e-3


def test_louis_positive_definite_and_published_scale(gmm_model, gmm_data, gmm_theta_star):
    louis = louis_fim(gmm_model, gmm_theta_star, gmm_data)
    assert np.all(np.linalg.eigvalsh(louis) > 0)
    # published run used a different random sample; magnitudes only
    assert_allclose(np.diag(louis), [2708.3, 176.6, 395.2], rtol=0.2)


def test_louis_needs_complete_info():
    model = DiagonalNoiseStateSpace(benchmark_spec())
    data = model.sample_data(np.ones(3), 10, master_rng(0))
    with pytest.raises(UnsupportedCapabilityError):
        louis_fim(model, np.ones(3), data)


def test_oakes_exact_on_quadratic_model():
    model = QuadraticModel(np.array([[2.0, 0.4], [0.4, 1.2]]))
    data = model.sample_data(np.zeros(2), 12, master_rng(1))
    expected = 12 * model.curvature
    # gradient route: differences of a linear map, exact at any step
    for step in (1e-2, 1e-4, 1e-6):
        assert_allclose(oakes_fim(model, np.zeros(2), data, fd_step=step), expected, rtol=1e-7)


class _NoScoreQuadratic(QuadraticModel):
    has_score = False

    def score(self, theta_cond, data):
        raise AssertionError("q-difference route must not call the score")


def test_oakes_q_difference_route_on_quadratic():
    model = _NoScoreQuadratic(np.array([[2.0, 0.4], [0.4, 1.2]]))
    data = model.sample_data(np.zeros(2), 12, master_rng(1))
    expected = 12 * model.curvature
    # second differences of a quadratic have no truncation error; step sizes
    # stay coarse so roundoff in the h^2 division stays negligible
    for step in (1e-2, 1e-3):
        assert_allclose(oakes_fim(model, np.zeros(2), data, fd_step=step), expected, rtol=1e-6)


def test_oakes_agrees_with_louis_on_mixture(gmm_model, gmm_data, gmm_theta_star):
    oakes = oakes_fim(gmm_model, gmm_theta_star, gmm_data)
    louis = louis_fim(gmm_model, gmm_theta_star, gmm_data)
    assert spectral_rel_error(oakes, louis) <= 1e-3


def test_oakes_agrees_with_filter_loglik_hessian(ssm_model, ssm_data, ssm_fit):
    theta_star = ssm_fit.theta_star
    oakes = oakes_fim(ssm_model, theta_star, ssm_data)
    h = 1e-4 * np.maximum(1.0, np.abs(theta_star))
    fd = -fd_hessian(lambda t: ssm_model.loglik(t, ssm_data), theta_star, h)
    assert spectral_rel_error(oakes, fd) <= 1e-2


def test_oakes_rejects_bad_step(gmm_model, gmm_data, gmm_theta_star):
    with pytest.raises(ValueError):
        oakes_fim(gmm_model, gmm_theta_star, gmm_data, fd_step=0.0)


class _AffineMapModel(EMModel):
    """em_map(theta) = B theta + b: difference quotients are exact."""

    def __init__(self, b_matrix, offset):
        self.b = np.asarray(b_matrix, dtype=float)
        self.offset = np.asarray(offset, dtype=float)
        self.dim = self.b.shape[0]
        self.param_names = tuple(f"t{i}" for i in range(self.dim))

    def validate(self, theta):
        pass

    def q_value(self, theta, theta_cond, data):
        return 0.0

    def em_map(self, theta, data):
        return self.b @ np.asarray(theta, dtype=float) + self.offset

    def sample_data(self, theta, n, rng):
        return Dataset(payload=None, n=n)


def _geometric_trace(theta_star, direction, count=12, rate=0.6):
    iterates = [theta_star + direction * rate**t for t in range(count)]
    return EMTrace(
        iterates=np.asarray(iterates), objectives=np.zeros(count), iterations=count - 1,
        converged=True,
    )


def test_sem_dm_exact_for_affine_map():
    b = np.array([[0.5, 0.2, 0.0], [0.1, 0.4, 0.3], [0.0, 0.2, 0.6]])
    theta_star = np.linalg.solve(np.eye(3) - b, np.array([0.3, -0.1, 0.2]))
    model = _AffineMapModel(b, np.array([0.3, -0.1, 0.2]))
    trace = _geometric_trace(theta_star, np.array([1.0, -0.5, 0.8]))
    data = Dataset(payload=None, n=1)
    dm = sem_dm(model, data, trace, theta_star)
    # entry (i, j) is dM_j / dtheta_i
    assert_allclose(dm.matrix, b.T, rtol=1e-10, atol=1e-12)
    assert dm.iterations_used == 3  # first comparison already agrees
    assert dm.method == "sem"


def test_sem_dm_identity_map():
    model = _AffineMapModel(np.eye(2), np.zeros(2))
    trace = _geometric_trace(np.array([0.5, -0.5]), np.array([1.0, 1.0]))
    dm = sem_dm(model, Dataset(payload=None, n=1), trace, np.array([0.5, -0.5]))
    assert_allclose(dm.matrix, np.eye(2), rtol=0, atol=1e-13)


def test_sem_dm_matches_fd_oracle(gmm_model, gmm_data, gmm_dm_fit):
    theta_star = gmm_dm_fit.theta_star
    oracle = fd_dm(gmm_model, gmm_data, theta_star)
    dm = sem_dm(gmm_model, gmm_data, gmm_dm_fit, theta_star)
    assert np.abs(dm.matrix - oracle.matrix).max() <= 0.01


def test_sem_dm_degenerate_coordinate():
    model = _AffineMapModel(np.eye(2) * 0.5, np.zeros(2))
    theta_star = np.zeros(2)
    iterates = np.array([[1.0, 1.0], [0.5, 0.5], [0.0, 0.3], [0.0, 0.2]])
    trace = EMTrace(iterates=iterates, objectives=np.zeros(4), iterations=3, converged=True)
    with pytest.raises(CoordinateDegenerateError):
        sem_dm(model, Dataset(payload=None, n=1), trace, theta_star)


def test_sem_dm_needs_enough_iterates():
    model = _AffineMapModel(np.eye(2) * 0.5, np.zeros(2))
    trace = _geometric_trace(np.zeros(2), np.ones(2), count=3)
    with pytest.raises(StabilizationError):
        sem_dm(model, Dataset(payload=None, n=1), trace, np.zeros(2))


def test_sem_fim_limit_cases(gmm_model, gmm_data, gmm_theta_star):
    parts = gmm_model.complete_info(gmm_theta_star, gmm_data)
    zero_dm = DMEstimate(matrix=np.zeros((3, 3)), method="sem", iterations_used=0)
    assert_allclose(
        sem_fim(gmm_model, zero_dm, gmm_theta_star, gmm_data),
        parts.cond_exp_neg_hessian,
        rtol=0,
        atol=0,
    )
    full_dm = DMEstimate(matrix=np.eye(3), method="sem", iterations_used=0)
    assert_allclose(
        sem_fim(gmm_model, full_dm, gmm_theta_star, gmm_data), np.zeros((3, 3)), rtol=0, atol=0
    )


def test_sem_fim_agrees_with_louis(gmm_model, gmm_data, gmm_dm_fit):
    theta_star = gmm_dm_fit.theta_star
    dm = sem_dm(gmm_model, gmm_data, gmm_dm_fit, theta_star)
    recovered = sem_fim(gmm_model, dm, theta_star, gmm_data)
    louis = louis_fim(gmm_model, theta_star, gmm_data)
    assert spectral_rel_error(recovered, louis) <= 0.02


def test_spsa_dm_unbiased_with_predicted_variance():
    b = np.array([[0.5, 0.2, -0.1], [0.3, 0.4, 0.0], [-0.2, 0.1, 0.6]])
    model = _AffineMapModel(b, np.zeros(3))
    data = Dataset(payload=None, n=1)
    theta_star = np.zeros(3)
    rng = master_rng(14)
    singles = np.array(
        [spsa_dm(model, data, theta_star, 0.01, 1, rng).matrix for _ in range(4000)]
    )
    se = singles.std(axis=0, ddof=1) / np.sqrt(len(singles))
    assert np.all(np.abs(singles.mean(axis=0) - b.T) <= 4 * se + 1e-12)
    # single-sample variance of entry (i, j) comes from the other rows of
    # the Jacobian: sum over s != i of (dM_j / dtheta_s)^2
    var_expected = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            var_expected[i, j] = sum(b[j, s] ** 2 for s in range(3) if s != i)
    observed = singles.var(axis=0, ddof=1)
    mask = var_expected > 0
    assert_allclose(observed[mask], var_expected[mask], rtol=0.25)
    assert np.all(observed[~mask] < 1e-20)


def test_spsa_dm_scalar_is_exact_central_difference():
    model = _AffineMapModel(np.array([[0.7]]), np.array([0.2]))
    dm = spsa_dm(model, Dataset(payload=None, n=1), np.array([0.5]), 0.01, 1, master_rng(0))
    assert dm.matrix[0, 0] == pytest.approx(0.7, rel=1e-12)


def test_spsa_dm_matches_fd_oracle(gmm_model, gmm_data, gmm_dm_fit):
    theta_star = gmm_dm_fit.theta_star
    oracle = fd_dm(gmm_model, gmm_data, theta_star)
    dm = spsa_dm(gmm_model, gmm_data, theta_star, 0.01, 50, master_rng(19))
    assert np.abs(dm.matrix - oracle.matrix).max() <= 0.05


def test_spsa_dm_out_of_domain(gmm_model, gmm_data):
    with pytest.raises(PerturbationOutOfDomainError):
        spsa_dm(gmm_model, gmm_data, np.array([0.999, 3.0, 0.0]), 0.01, 5, master_rng(0))


def test_fd_dm_orientation_and_constant_map():
    b = np.array([[0.5, 0.2], [0.1, 0.4]])
    model = _AffineMapModel(b, np.zeros(2))
    dm = fd_dm(model, Dataset(payload=None, n=1), np.array([0.3, 0.3]))
    assert_allclose(dm.matrix, b.T, rtol=1e-9, atol=1e-12)
    flat = QuadraticModel(np.eye(2))
    data = flat.sample_data(np.zeros(2), 5, master_rng(3))
    assert_allclose(fd_dm(flat, data, np.zeros(2)).matrix, np.zeros((2, 2)), atol=1e-10)
