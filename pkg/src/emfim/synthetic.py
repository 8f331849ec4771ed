"""Synthetic Gaussian-location problem with an exactly linear score.

Observations are i.i.d. N(theta, C^{-1}) with a known precision matrix C and
nothing is missing, so the Q-function equals the observed log-likelihood,
the EM map jumps to the sample mean in one step, and every information
matrix equals n * C exactly. This makes the model a ground-truth fixture:
the perturbation Hessian estimator is exact on it in one dimension and
unbiased elementwise in general.
"""

from __future__ import annotations

import numpy as np

from .em import CompleteInfoParts, Dataset, EMModel
from .errors import InvalidParameterError


class QuadraticModel(EMModel):
    """Likelihood with constant curvature ``-n * C``."""

    has_score = True
    has_loglik = True
    has_complete_info = True

    def __init__(self, curvature):
        c = np.atleast_2d(np.asarray(curvature, dtype=float))
        if c.shape[0] != c.shape[1]:
            raise ValueError("curvature must be square")
        if not np.allclose(c, c.T):
            raise ValueError("curvature must be symmetric")
        eigvals = np.linalg.eigvalsh(c)
        if np.min(eigvals) <= 0:
            raise ValueError("curvature must be positive definite")
        self.curvature = c
        self.dim = c.shape[0]
        self.param_names = tuple(f"theta{i + 1}" for i in range(self.dim))
        self._cov_chol = np.linalg.cholesky(np.linalg.inv(c))
        self._logdet = float(np.linalg.slogdet(c)[1])

    def validate(self, theta) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise InvalidParameterError(f"expected {self.dim} parameters, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise InvalidParameterError(f"non-finite parameter in {theta}")

    def loglik(self, theta, data: Dataset) -> float:
        self.validate(theta)
        resid = data.payload - np.asarray(theta, dtype=float)
        quad = np.einsum("ni,ij,nj->", resid, self.curvature, resid)
        return float(0.5 * data.n * (self._logdet - self.dim * np.log(2 * np.pi)) - 0.5 * quad)

    def q_value(self, theta, theta_cond, data: Dataset) -> float:
        # no missing data: the conditioning slot is inert
        self.validate(theta_cond)
        return self.loglik(theta, data)

    def score(self, theta_cond, data: Dataset) -> np.ndarray:
        self.validate(theta_cond)
        resid = data.payload - np.asarray(theta_cond, dtype=float)
        return self.curvature @ resid.sum(axis=0)

    def em_map(self, theta, data: Dataset) -> np.ndarray:
        self.validate(theta)
        return data.payload.mean(axis=0)

    def sample_data(self, theta, n: int, rng: np.random.Generator) -> Dataset:
        self.validate(theta)
        if n < 1:
            raise ValueError("n must be at least 1")
        y = np.asarray(theta, dtype=float) + rng.standard_normal((n, self.dim)) @ self._cov_chol.T
        y.flags.writeable = False
        return Dataset(payload=y, n=n)

    def complete_info(self, theta, data: Dataset) -> CompleteInfoParts:
        s = self.score(theta, data)
        return CompleteInfoParts(
            cond_exp_neg_hessian=data.n * self.curvature,
            cond_exp_score_outer=np.outer(s, s),
            cond_score=s,
        )
