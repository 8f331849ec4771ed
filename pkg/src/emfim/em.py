"""Model abstraction and the EM driver.

A concrete incomplete-data problem implements :class:`EMModel`: it must be
able to evaluate the conditional expectation of the complete-data
log-likelihood (the Q-function), perform one full E+M step, and simulate
observed data. Optional capabilities -- the Q-function gradient at the
conditioning point (which equals the observed-data score), the observed-data
log-likelihood, and the conditional complete-data information pieces -- are
advertised through ``has_*`` flags so estimators can pick the cheapest
available route and fall back explicitly when one is missing.

All model operations are pure: the same inputs produce the same outputs and
the dataset is never mutated, so a model plus dataset can be shared
read-only across worker processes.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import UnsupportedCapabilityError


@dataclass(frozen=True)
class Dataset:
    """Observed data for one EM problem.

    ``payload`` is model-specific and opaque to the estimators. ``n`` counts
    observation units: the sample size for i.i.d. models, the horizon for
    time-series models. Pseudodata generated during Monte Carlo runs inherits
    this ``n``.
    """

    payload: Any
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dataset must contain at least one observation unit")


@dataclass(frozen=True)
class EMConfig:
    """Stopping rule for the EM iteration.

    The driver stops when two successive objective values differ by less
    than ``delta`` (in absolute value) or when ``max_iterations`` full E+M
    steps have been taken.
    """

    delta: float = 1e-8
    max_iterations: int = 10000

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class EMTrace:
    """Full record of one EM run.

    ``iterates`` holds every parameter vector theta^(0), ..., theta^(T) (the
    supplemented-EM recursion reads early iterates, so nothing is discarded).
    For models with an observed log-likelihood, ``objectives[t]`` is the
    log-likelihood of ``iterates[t]`` and has one entry per iterate;
    otherwise ``objectives[t]`` is Q(theta^(t+1) | theta^(t)) and has one
    entry per step.
    """

    iterates: np.ndarray
    objectives: np.ndarray
    iterations: int
    converged: bool

    @property
    def theta_star(self) -> np.ndarray:
        return self.iterates[-1]


@dataclass(frozen=True)
class CompleteInfoParts:
    """Conditional complete-data information pieces used by Louis's identity.

    ``cond_exp_neg_hessian``
        E[-d^2 L_complete / d theta d theta^T | Y, theta], the complete-data
        information matrix given the observed data.
    ``cond_exp_score_outer``
        E[(d L_complete / d theta)(d L_complete / d theta)^T | Y, theta].
    ``cond_score``
        E[d L_complete / d theta | Y, theta], which equals the observed-data
        score.
    """

    cond_exp_neg_hessian: np.ndarray
    cond_exp_score_outer: np.ndarray
    cond_score: np.ndarray


class EMModel(ABC):
    """Capability interface implemented by each concrete EM problem.

    Attributes
    ----------
    dim : int
        Parameter dimension d.
    param_names : tuple of str
        Coordinate labels used in reports.
    has_score, has_loglik, has_complete_info : bool
        Optional-capability flags. Calling an unadvertised operation raises
        :class:`UnsupportedCapabilityError`; callers are expected to branch on
        the flags rather than catch it.
    """

    dim: int
    param_names: tuple[str, ...] = ()
    has_score: bool = False
    has_loglik: bool = False
    has_complete_info: bool = False

    @abstractmethod
    def validate(self, theta: np.ndarray) -> None:
        """Raise :class:`InvalidParameterError` if theta is out of domain.

        Out-of-domain evaluation is always an error, never a silent clamp:
        perturbation-based estimators must see domain failures explicitly.
        """

    @abstractmethod
    def q_value(self, theta: np.ndarray, theta_cond: np.ndarray, data: Dataset) -> float:
        """Conditional expectation of the complete-data log-likelihood.

        Returns E[L(theta | complete data) | data, theta_cond], i.e. the
        E-step objective evaluated at ``theta`` with responsibilities (or
        smoothed moments) computed at ``theta_cond``.
        """

    @abstractmethod
    def em_map(self, theta: np.ndarray, data: Dataset) -> np.ndarray:
        """One full E+M step: the parameter value maximizing
        ``q_value(. , theta, data)``."""

    @abstractmethod
    def sample_data(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> Dataset:
        """Draw a dataset of size ``n`` from the observed-data law at theta.

        Deterministic given ``rng``; used for parametric-bootstrap
        pseudodata.
        """

    def score(self, theta_cond: np.ndarray, data: Dataset) -> np.ndarray:
        """Gradient of the Q-function in its first slot at the conditioning
        point, which equals the observed-data score at ``theta_cond``."""
        raise UnsupportedCapabilityError(
            f"{type(self).__name__} does not provide the E-step gradient"
        )

    def loglik(self, theta: np.ndarray, data: Dataset) -> float:
        """Observed-data log-likelihood."""
        raise UnsupportedCapabilityError(
            f"{type(self).__name__} does not provide an observed-data log-likelihood"
        )

    def complete_info(self, theta: np.ndarray, data: Dataset) -> CompleteInfoParts:
        """Conditional complete-data information pieces at ``theta``."""
        raise UnsupportedCapabilityError(
            f"{type(self).__name__} does not provide complete-data information"
        )


def run_em(
    model: EMModel,
    data: Dataset,
    theta0: np.ndarray,
    config: EMConfig | None = None,
) -> EMTrace:
    """Iterate the EM map from ``theta0`` until the objective stabilizes.

    The objective is the observed log-likelihood when the model provides one
    (its successive differences are the textbook stopping rule); otherwise
    successive values Q(theta^(t+1) | theta^(t)) are compared, which dominate
    the log-likelihood differences near a fixed point.

    Non-convergence within ``max_iterations`` is not an exception: the trace
    comes back with ``converged=False`` and the caller decides.
    """
    if config is None:
        config = EMConfig()
    theta = np.asarray(theta0, dtype=float)
    model.validate(theta)

    iterates = [theta]
    objectives: list[float] = []
    if model.has_loglik:
        objectives.append(model.loglik(theta, data))

    converged = False
    for _ in range(config.max_iterations):
        theta_next = model.em_map(theta, data)
        iterates.append(theta_next)
        if model.has_loglik:
            objectives.append(model.loglik(theta_next, data))
            gap = abs(objectives[-1] - objectives[-2])
        else:
            objectives.append(model.q_value(theta_next, theta, data))
            gap = abs(objectives[-1] - objectives[-2]) if len(objectives) >= 2 else np.inf
        theta = theta_next
        if gap < config.delta:
            converged = True
            break

    return EMTrace(
        iterates=np.asarray(iterates),
        objectives=np.asarray(objectives),
        iterations=len(iterates) - 1,
        converged=converged,
    )
