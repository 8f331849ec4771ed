"""Two-component Gaussian mixture with unit component variances.

theta = (pi, mu1, mu2): an observation comes from N(mu2, 1) with probability
pi and from N(mu1, 1) otherwise, so the observed-data density is

    p(y) = (1 - pi) phi(y - mu1) + pi phi(y - mu2).

The missing datum per observation is the component label. Responsibilities
and densities are evaluated in log space (log-sum-exp), since the direct-
space formulas underflow once |y - mu| exceeds roughly 38.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import xlogy

from .em import CompleteInfoParts, Dataset, EMModel
from .errors import (
    BoundaryParameterError,
    DegeneratePosteriorError,
    InvalidParameterError,
    OracleFailureError,
)

_LOG_2PI = math.log(2.0 * math.pi)


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (3,):
        raise InvalidParameterError(f"expected 3 parameters (pi, mu1, mu2), got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise InvalidParameterError(f"non-finite parameter in {theta}")
    if not 0.0 <= theta[0] <= 1.0:
        raise InvalidParameterError(f"mixing weight {theta[0]} outside [0, 1]")
    return theta


def _log_phi(x: np.ndarray) -> np.ndarray:
    return -0.5 * x * x - 0.5 * _LOG_2PI


def _log_weighted_components(y: np.ndarray, theta: np.ndarray):
    """log((1-pi) phi(y - mu1)) and log(pi phi(y - mu2)), elementwise."""
    pi, mu1, mu2 = theta
    with np.errstate(divide="ignore"):  # pi on a boundary gives an exact -inf
        a = np.log1p(-pi) + _log_phi(y - mu1)
        b = np.log(pi) + _log_phi(y - mu2)
    return a, b


def make_dataset(y) -> Dataset:
    """Wrap a 1-D array of observations as an immutable dataset."""
    y = np.array(y, dtype=float).reshape(-1)
    if y.size < 1:
        raise ValueError("need at least one observation")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations must be finite")
    y.flags.writeable = False
    return Dataset(payload=y, n=y.size)


def write_data(path, data: Dataset) -> None:
    """One observation per line, plain decimal text."""
    np.savetxt(path, data.payload, fmt="%.17g")


def read_data(path) -> Dataset:
    return make_dataset(np.atleast_1d(np.loadtxt(path, dtype=float)))


def mixture_density(y, theta) -> np.ndarray:
    """Observed-data density (1-pi) phi(y-mu1) + pi phi(y-mu2)."""
    theta = _check_theta(theta)
    a, b = _log_weighted_components(np.asarray(y, dtype=float), theta)
    return np.exp(np.logaddexp(a, b))


def responsibility(y, theta) -> np.ndarray:
    """Posterior probability that an observation came from component 2.

    alpha(y) = pi phi(y-mu2) / [(1-pi) phi(y-mu1) + pi phi(y-mu2)], exact at
    the boundaries pi = 0 (alpha = 0) and pi = 1 (alpha = 1).
    """
    theta = _check_theta(theta)
    a, b = _log_weighted_components(np.asarray(y, dtype=float), theta)
    return np.exp(b - np.logaddexp(a, b))


def observed_score(y, theta) -> np.ndarray:
    """Per-observation gradient of log mixture_density, shape (n, 3).

    Differentiates the mixture density directly -- an independent route to
    the same quantity the E-step gradient produces via responsibilities.
    Requires interior pi.
    """
    theta = _check_theta(theta)
    pi, mu1, mu2 = theta
    if pi in (0.0, 1.0):
        raise BoundaryParameterError("observed score needs pi in the open interval (0, 1)")
    y = np.asarray(y, dtype=float)
    a, b = _log_weighted_components(y, theta)
    log_p = np.logaddexp(a, b)
    phi1_over_p = np.exp(_log_phi(y - mu1) - log_p)
    phi2_over_p = np.exp(_log_phi(y - mu2) - log_p)
    return np.stack(
        [
            phi2_over_p - phi1_over_p,
            (1.0 - pi) * phi1_over_p * (y - mu1),
            pi * phi2_over_p * (y - mu2),
        ],
        axis=-1,
    )


def expected_fim_oracle(theta, n: int, tol: float = 1e-9) -> np.ndarray:
    """Expected Fisher information by adaptive quadrature.

    Integrates n * s(y) s(y)^T p(y) over y in [min(mu)-10, max(mu)+10],
    where s is the single-observation observed score. Serves as an
    independent reference for the Monte Carlo estimators; it never touches
    the E-step machinery.
    """
    theta = _check_theta(theta)
    pi, mu1, mu2 = theta
    if not 0.0 < pi < 1.0:
        raise InvalidParameterError("oracle requires interior pi")
    lo = min(mu1, mu2) - 10.0
    hi = max(mu1, mu2) + 10.0

    def integrand(y):
        s = observed_score(np.array([y]), theta)[0]
        return np.outer(s, s) * mixture_density(np.array([y]), theta)[0]

    result, err = quad_vec(integrand, lo, hi, epsabs=tol, epsrel=tol)
    if err > max(tol, 1e-8 * np.linalg.norm(result)):
        raise OracleFailureError(f"quadrature error estimate {err} above tolerance")
    return n * result


class GaussianMixture(EMModel):
    """EM problem for the two-component unit-variance mixture."""

    dim = 3
    param_names = ("pi", "mu1", "mu2")
    has_score = True
    has_loglik = True
    has_complete_info = True

    def validate(self, theta) -> None:
        _check_theta(theta)

    def loglik(self, theta, data: Dataset) -> float:
        theta = _check_theta(theta)
        a, b = _log_weighted_components(data.payload, theta)
        return float(np.sum(np.logaddexp(a, b)))

    def q_value(self, theta, theta_cond, data: Dataset) -> float:
        alpha = responsibility(data.payload, _check_theta(theta_cond))
        pi, mu1, mu2 = _check_theta(theta)
        y = data.payload
        # xlogy keeps the boundary convention 0 * log 0 = 0
        terms = (
            xlogy(alpha, pi)
            + xlogy(1.0 - alpha, 1.0 - pi)
            + alpha * _log_phi(y - mu2)
            + (1.0 - alpha) * _log_phi(y - mu1)
        )
        return float(np.sum(terms))

    def score(self, theta_cond, data: Dataset) -> np.ndarray:
        theta = _check_theta(theta_cond)
        pi, mu1, mu2 = theta
        if pi in (0.0, 1.0):
            raise BoundaryParameterError("E-step gradient is singular at pi in {0, 1}")
        alpha = responsibility(data.payload, theta)
        y = data.payload
        return np.array(
            [
                np.sum(alpha) / pi - np.sum(1.0 - alpha) / (1.0 - pi),
                np.sum((1.0 - alpha) * (y - mu1)),
                np.sum(alpha * (y - mu2)),
            ]
        )

    def em_map(self, theta, data: Dataset) -> np.ndarray:
        alpha = responsibility(data.payload, _check_theta(theta))
        y = data.payload
        n = data.n
        mass2 = float(np.sum(alpha))
        mass1 = float(np.sum(1.0 - alpha))
        if mass2 <= 0.0 or mass1 <= 0.0:
            raise DegeneratePosteriorError(
                f"a component owns no posterior mass (sum alpha = {mass2}, n = {n})"
            )
        return np.array(
            [mass2 / n, float(np.sum((1.0 - alpha) * y)) / mass1, float(np.sum(alpha * y)) / mass2]
        )

    def sample_data(self, theta, n: int, rng: np.random.Generator) -> Dataset:
        theta = _check_theta(theta)
        if n < 1:
            raise ValueError("n must be at least 1")
        pi, mu1, mu2 = theta
        from_second = rng.random(n) < pi
        y = np.where(from_second, mu2, mu1) + rng.standard_normal(n)
        return make_dataset(y)

    def complete_info(self, theta, data: Dataset) -> CompleteInfoParts:
        theta = _check_theta(theta)
        pi, mu1, mu2 = theta
        if pi in (0.0, 1.0):
            raise BoundaryParameterError("complete-data information is singular at pi in {0, 1}")
        alpha = responsibility(data.payload, theta)
        y = data.payload
        r1 = y - mu1
        r2 = y - mu2

        neg_hessian = np.diag(
            [
                float(np.sum(alpha / pi**2 + (1.0 - alpha) / (1.0 - pi) ** 2)),
                float(np.sum(1.0 - alpha)),
                float(np.sum(alpha)),
            ]
        )

        # E[s_i s_i^T | Y]: the label is Bernoulli(alpha_i) and X(1-X) = 0,
        # so the squares collapse to first moments of X.
        e_outer = np.zeros((3, 3))
        e_outer[0, 0] = np.sum(alpha / pi**2 + (1.0 - alpha) / (1.0 - pi) ** 2)
        e_outer[0, 1] = e_outer[1, 0] = np.sum(-(1.0 - alpha) * r1 / (1.0 - pi))
        e_outer[0, 2] = e_outer[2, 0] = np.sum(alpha * r2 / pi)
        e_outer[1, 1] = np.sum((1.0 - alpha) * r1 * r1)
        e_outer[2, 2] = np.sum(alpha * r2 * r2)

        means = np.stack(
            [alpha / pi - (1.0 - alpha) / (1.0 - pi), (1.0 - alpha) * r1, alpha * r2], axis=-1
        )
        mean_outer = np.einsum("ni,nj->ij", means, means)
        cond_score = means.sum(axis=0)

        # E[(sum_i s_i)(sum_i s_i)^T | Y] via independence of labels given Y
        score_outer = e_outer - mean_outer + np.outer(cond_score, cond_score)
        return CompleteInfoParts(
            cond_exp_neg_hessian=neg_hessian,
            cond_exp_score_outer=score_outer,
            cond_score=cond_score,
        )
