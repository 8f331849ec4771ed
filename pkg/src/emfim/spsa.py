"""Monte Carlo Fisher information from simultaneous perturbation probes.

One replicate draws a Bernoulli +/-c probe direction Delta, evaluates the
E-step gradient at theta +/- Delta (directly, or through a two-point
Q-value difference when the gradient is not available), and assembles a
symmetrized Hessian sample

    H_hat = 1/2 [ (dS/2) (1/Delta)^T + ((dS/2) (1/Delta)^T)^T ],

where dS is the gradient difference between the two probe points. The
Fisher information estimate is the negative average of the samples over N
replicates: fresh pseudodata per replicate for the expected information,
the fixed observed dataset for the observed information.

Replicate k draws from streams derived from (seed, k), so estimates are
identical regardless of execution order or process count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .em import Dataset, EMModel
from .errors import (
    InvalidParameterError,
    InvalidPerturbationError,
    PerturbationOutOfDomainError,
    UnsupportedCapabilityError,
)
from .rng import replicate_streams

MODES = ("expected", "observed")
GRADIENT_SOURCES = ("score", "q_differences")

WORKERS_ENV_VAR = "EMFIM_WORKERS"


@dataclass(frozen=True)
class SPSAConfig:
    """Knobs of one Monte Carlo information-matrix run.

    ``c`` is the perturbation magnitude in raw parameter units; the O(c^2)
    bias is negligible at c = 0.01 for parameters of order one while keeping
    gradient differences far above floating-point noise. ``gradient_source``
    selects direct E-step gradient evaluations (``"score"``) or the
    four-Q-value fallback (``"q_differences"``).
    """

    c: float = 0.01
    n_replicates: int = 1000
    seed: int = 0
    mode: str = "expected"
    gradient_source: str = "score"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("perturbation magnitude c must be positive")
        if self.n_replicates < 1:
            raise ValueError("need at least one replicate")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.gradient_source not in GRADIENT_SOURCES:
            raise ValueError(
                f"gradient_source must be one of {GRADIENT_SOURCES}, got {self.gradient_source!r}"
            )


@dataclass(frozen=True)
class HessianSample:
    """One symmetrized d x d curvature sample."""

    matrix: np.ndarray
    replicate: int


@dataclass(frozen=True)
class FIMEstimate:
    """Negative average of Hessian samples plus reporting metadata.

    ``matrix`` is exactly -mean(samples); ``per_sample_variance`` holds the
    elementwise sample variance of the Hessian samples, so the standard
    error of each entry of ``matrix`` is sqrt(variance / n_replicates).
    """

    matrix: np.ndarray
    mode: str
    n_replicates: int
    c: float
    seed: int
    per_sample_variance: np.ndarray

    @property
    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.per_sample_variance / self.n_replicates)


def gen_perturbation(c: float, d: int, rng: np.random.Generator) -> np.ndarray:
    """Vector of d independent entries, each -c or +c with probability 1/2."""
    if not c > 0:
        raise ValueError("c must be positive")
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return c * (2.0 * rng.integers(0, 2, size=d) - 1.0)


def hessian_sample_from_gradients(
    s_plus: np.ndarray, s_minus: np.ndarray, delta: np.ndarray, replicate: int = 0
) -> HessianSample:
    """Symmetric curvature sample from a pair of gradient evaluations.

    ``s_plus`` and ``s_minus`` are gradients at theta + delta and
    theta - delta. The result is exactly symmetric by construction (the
    averaged matrix and its transpose share every addition).
    """
    s_plus = np.asarray(s_plus, dtype=float)
    s_minus = np.asarray(s_minus, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if not (s_plus.shape == s_minus.shape == delta.shape) or s_plus.ndim != 1:
        raise ValueError("gradients and perturbation must be vectors of equal length")
    if np.any(delta == 0.0):
        raise InvalidPerturbationError("perturbation vector has a zero entry")
    half_diff = 0.5 * (s_plus - s_minus)
    m = np.outer(half_diff, 1.0 / delta)
    return HessianSample(matrix=0.5 * (m + m.T), replicate=replicate)


def s_hat_from_q(
    model: EMModel, theta_center: np.ndarray, delta_hat: np.ndarray, data: Dataset
) -> np.ndarray:
    """Simultaneous-perturbation estimate of the E-step gradient at
    ``theta_center`` from two Q values.

    Both Q evaluations condition on ``theta_center``, so one E step's worth
    of posterior quantities backs the pair:

        s_hat = [Q(theta_c + dh | theta_c) - Q(theta_c - dh | theta_c)] / (2 dh)

    with the division entrywise in the perturbation dh.
    """
    theta_center = np.asarray(theta_center, dtype=float)
    delta_hat = np.asarray(delta_hat, dtype=float)
    if np.any(delta_hat == 0.0):
        raise InvalidPerturbationError("perturbation vector has a zero entry")
    theta_plus = theta_center + delta_hat
    theta_minus = theta_center - delta_hat
    try:
        model.validate(theta_plus)
        model.validate(theta_minus)
    except InvalidParameterError as exc:
        raise PerturbationOutOfDomainError(f"Q probe left the domain: {exc}") from exc
    dq = model.q_value(theta_plus, theta_center, data) - model.q_value(
        theta_minus, theta_center, data
    )
    return (0.5 * dq) / delta_hat


def _one_sample(
    model: EMModel,
    theta_star: np.ndarray,
    template_data: Dataset,
    config: SPSAConfig,
    k: int,
) -> np.ndarray:
    data_rng, probe_rng = replicate_streams(config.seed, k)
    if config.mode == "expected":
        data = model.sample_data(theta_star, template_data.n, data_rng)
    else:
        data = template_data

    delta = gen_perturbation(config.c, model.dim, probe_rng)
    theta_plus = theta_star + delta
    theta_minus = theta_star - delta
    try:
        model.validate(theta_plus)
        model.validate(theta_minus)
    except InvalidParameterError as exc:
        raise PerturbationOutOfDomainError(f"replicate {k}: {exc}", replicate=k) from exc

    if config.gradient_source == "score":
        s_plus = model.score(theta_plus, data)
        s_minus = model.score(theta_minus, data)
    else:
        # one hat-perturbation per replicate, shared by both probe branches
        delta_hat = gen_perturbation(config.c, model.dim, probe_rng)
        try:
            s_plus = s_hat_from_q(model, theta_plus, delta_hat, data)
            s_minus = s_hat_from_q(model, theta_minus, delta_hat, data)
        except PerturbationOutOfDomainError as exc:
            raise PerturbationOutOfDomainError(f"replicate {k}: {exc}", replicate=k) from exc
    return hessian_sample_from_gradients(s_plus, s_minus, delta, replicate=k).matrix


def _sample_range(args) -> np.ndarray:
    model, theta_star, template_data, config, k_lo, k_hi = args
    d = model.dim
    out = np.empty((k_hi - k_lo, d, d))
    for k in range(k_lo, k_hi):
        out[k - k_lo] = _one_sample(model, theta_star, template_data, config, k)
    return out


def _resolve_workers(n_workers: int | None) -> int:
    if n_workers is None:
        n_workers = int(os.environ.get(WORKERS_ENV_VAR, "1"))
    if n_workers < 1:
        raise ValueError("worker count must be at least 1")
    return n_workers


def hessian_samples(
    model: EMModel,
    theta_star: np.ndarray,
    template_data: Dataset,
    config: SPSAConfig,
    n_workers: int | None = None,
) -> np.ndarray:
    """All N Hessian samples, shape (N, d, d), in replicate order.

    Replicates are independent; with ``n_workers > 1`` contiguous index
    ranges run in separate processes and the result is bit-identical to the
    sequential run.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    model.validate(theta_star)
    if config.gradient_source == "score" and not model.has_score:
        raise UnsupportedCapabilityError(
            "model has no E-step gradient; use gradient_source='q_differences'"
        )
    n = config.n_replicates
    n_workers = _resolve_workers(n_workers)
    if n_workers == 1 or n < 2 * n_workers:
        return _sample_range((model, theta_star, template_data, config, 0, n))

    bounds = np.linspace(0, n, 4 * n_workers + 1, dtype=int)
    chunks = [
        (model, theta_star, template_data, config, int(lo), int(hi))
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        parts = list(pool.map(_sample_range, chunks))
    return np.concatenate(parts, axis=0)


def estimate_fim(
    model: EMModel,
    theta_star: np.ndarray,
    template_data: Dataset,
    config: SPSAConfig,
    n_workers: int | None = None,
) -> FIMEstimate:
    """Expected or observed Fisher information at a converged MLE.

    In ``expected`` mode each replicate simulates fresh pseudodata at
    ``theta_star`` with the template's sample size (parametric bootstrap);
    in ``observed`` mode every replicate reuses ``template_data`` and only
    the perturbations vary. No positive-definiteness repair is applied: the
    negative average is reported as-is, and small-N estimates may be
    indefinite.
    """
    samples = hessian_samples(model, theta_star, template_data, config, n_workers=n_workers)
    matrix = -samples.mean(axis=0)
    if config.n_replicates > 1:
        variance = samples.var(axis=0, ddof=1)
    else:
        variance = np.zeros_like(matrix)
    return FIMEstimate(
        matrix=matrix,
        mode=config.mode,
        n_replicates=config.n_replicates,
        c=config.c,
        seed=config.seed,
        per_sample_variance=variance,
    )
