"""Classical observed-information computations used for validation.

Louis's identity assembles the observed information from conditional
complete-data moments; Oakes's identity reads it off second derivatives of
the Q-function; the supplemented-EM recursion recovers it from the
complete-data information and the Jacobian of the EM map. A direct
central-difference Jacobian of the EM map is included as the reference the
stochastic estimates are checked against.

Jacobian orientation: entry (i, j) of every map-Jacobian estimate here is
d M_j / d theta_i, matching the difference quotient

    r_ij = [M_j(theta* with coordinate i perturbed) - M_j(theta*)] / (perturbation),

so the observed information satisfies I_obs = (I - DM) @ I_complete with the
matrices as returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .em import Dataset, EMModel, EMTrace
from .errors import (
    CoordinateDegenerateError,
    InvalidParameterError,
    PerturbationOutOfDomainError,
    StabilizationError,
    UnsupportedCapabilityError,
)
from .spsa import gen_perturbation


@dataclass(frozen=True)
class DMEstimate:
    """Estimate of the EM-map Jacobian at the MLE.

    ``iterations_used``: the highest EM-trace index consumed (``sem``), the
    number of perturbation replicates (``spsa``), or the number of map
    evaluations (``oracle_fd``).
    """

    matrix: np.ndarray
    method: str
    iterations_used: int


def louis_fim(model: EMModel, theta_star: np.ndarray, data: Dataset) -> np.ndarray:
    """Observed information via Louis (1982).

    -E[H_complete | Y] - E[s s^T | Y] + E[s | Y] E[s | Y]^T at theta_star,
    with all expectations over the missing data given the observations.
    """
    if not model.has_complete_info:
        raise UnsupportedCapabilityError("Louis's identity needs complete-data information")
    parts = model.complete_info(np.asarray(theta_star, dtype=float), data)
    s = parts.cond_score
    return parts.cond_exp_neg_hessian - parts.cond_exp_score_outer + np.outer(s, s)


def oakes_fim(
    model: EMModel, theta_star: np.ndarray, data: Dataset, fd_step: float = 1e-4
) -> np.ndarray:
    """Observed information via Oakes (1999), by central finite differences.

    The identity states that the Hessian of the observed log-likelihood is
    the total derivative of the E-step gradient along the diagonal
    theta = theta_cond. With a gradient available this is one Jacobian of
    ``score``; otherwise the first-slot Hessian and the mixed second
    derivative of the Q-function are differenced separately and summed.
    The sign is chosen so the result is an information matrix (positive
    definite at a regular MLE). Steps are scaled by coordinate magnitude.
    """
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    theta_star = np.asarray(theta_star, dtype=float)
    model.validate(theta_star)
    d = model.dim
    h = fd_step * np.maximum(1.0, np.abs(theta_star))

    if model.has_score:
        jac = np.empty((d, d))
        for j in range(d):
            step = np.zeros(d)
            step[j] = h[j]
            s_plus = model.score(theta_star + step, data)
            s_minus = model.score(theta_star - step, data)
            jac[:, j] = (s_plus - s_minus) / (2.0 * h[j])
        return -0.5 * (jac + jac.T)

    def q(theta, theta_cond):
        return model.q_value(theta, theta_cond, data)

    q00 = q(theta_star, theta_star)
    hess = np.empty((d, d))
    mixed = np.empty((d, d))
    eye = np.eye(d)
    for i in range(d):
        ei = h[i] * eye[i]
        hess[i, i] = (q(theta_star + ei, theta_star) - 2.0 * q00 + q(theta_star - ei, theta_star)) / h[i] ** 2
        for j in range(d):
            ej = h[j] * eye[j]
            if j > i:
                hess[i, j] = hess[j, i] = (
                    q(theta_star + ei + ej, theta_star)
                    - q(theta_star + ei - ej, theta_star)
                    - q(theta_star - ei + ej, theta_star)
                    + q(theta_star - ei - ej, theta_star)
                ) / (4.0 * h[i] * h[j])
            mixed[i, j] = (
                q(theta_star + ei, theta_star + ej)
                - q(theta_star + ei, theta_star - ej)
                - q(theta_star - ei, theta_star + ej)
                + q(theta_star - ei, theta_star - ej)
            ) / (4.0 * h[i] * h[j])
    total = hess + mixed
    return -0.5 * (total + total.T)


def sem_dm(
    model: EMModel,
    data: Dataset,
    trace: EMTrace,
    theta_star: np.ndarray,
    stability_tol: float = 1e-4,
) -> DMEstimate:
    """Supplemented-EM estimate of the EM-map Jacobian.

    For each coordinate i and trace index t the row of difference quotients

        r_ij^(t) = [M_j(theta* with theta_i^(t) in slot i) - M_j(theta*)] / (theta_i^(t) - theta_i*)

    is computed from t = 2 upward (the second iterate is the recommended
    starting point) and each entry is frozen the first time two successive
    values agree to within ``stability_tol``. The default tolerance is the
    square root of the default EM ``delta``, matching the convention that
    the quotient cannot be more accurate than the EM fit itself.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    d = model.dim
    iterates = np.asarray(trace.iterates, dtype=float)
    if len(iterates) < 4:
        raise StabilizationError(
            f"need at least 4 EM iterates to stabilize difference quotients, got {len(iterates)}"
        )
    m_star = model.em_map(theta_star, data)

    result = np.full((d, d), np.nan)
    stabilized = np.zeros((d, d), dtype=bool)
    prev_rows: dict[int, np.ndarray] = {}
    highest_t = 2

    for t in range(2, len(iterates)):
        for i in range(d):
            if stabilized[i].all():
                continue
            diff = iterates[t, i] - theta_star[i]
            if abs(diff) < 1e-13 * max(1.0, abs(theta_star[i])):
                raise CoordinateDegenerateError(
                    f"iterate {t} coincides with the MLE in coordinate {i}; "
                    "difference quotient is below floating-point safety"
                )
            probe = theta_star.copy()
            probe[i] = iterates[t, i]
            row = (model.em_map(probe, data) - m_star) / diff
            if i in prev_rows:
                newly = (~stabilized[i]) & (np.abs(row - prev_rows[i]) < stability_tol)
                result[i, newly] = row[newly]
                stabilized[i, newly] = True
            prev_rows[i] = row
            highest_t = t
        if stabilized.all():
            break

    if not stabilized.all():
        raise StabilizationError(
            "difference quotients did not stabilize within the trace; "
            f"{int((~stabilized).sum())} entries still moving after iterate {highest_t}"
        )
    return DMEstimate(matrix=result, method="sem", iterations_used=highest_t)


def sem_fim(
    model: EMModel, dm: DMEstimate, theta_star: np.ndarray, data: Dataset
) -> np.ndarray:
    """Observed information recovered from the map Jacobian:
    (I - DM) @ complete-data information, both evaluated at theta_star.

    The product is symmetric only up to the accuracy of ``dm``; it is
    reported as computed so disagreement with Louis's identity stays
    visible.
    """
    if not model.has_complete_info:
        raise UnsupportedCapabilityError("SEM recovery needs complete-data information")
    parts = model.complete_info(np.asarray(theta_star, dtype=float), data)
    return (np.eye(model.dim) - dm.matrix) @ parts.cond_exp_neg_hessian


def spsa_dm(
    model: EMModel,
    data: Dataset,
    theta_star: np.ndarray,
    c: float,
    n_samples: int,
    rng: np.random.Generator,
) -> DMEstimate:
    """EM-map Jacobian by averaged simultaneous-perturbation quotients.

    Sample k contributes [M_j(theta* + Delta_k) - M_j(theta* - Delta_k)] /
    (2 Delta_ki) to entry (i, j); cross terms are mean zero, so the average
    converges to the Jacobian.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    if n_samples < 1:
        raise ValueError("need at least one sample")
    d = model.dim
    total = np.zeros((d, d))
    for k in range(n_samples):
        delta = gen_perturbation(c, d, rng)
        try:
            model.validate(theta_star + delta)
            model.validate(theta_star - delta)
        except InvalidParameterError as exc:
            raise PerturbationOutOfDomainError(f"sample {k}: {exc}", replicate=k) from exc
        m_diff = model.em_map(theta_star + delta, data) - model.em_map(theta_star - delta, data)
        total += np.outer(1.0 / (2.0 * delta), m_diff)
    return DMEstimate(matrix=total / n_samples, method="spsa", iterations_used=n_samples)


def fd_dm(
    model: EMModel, data: Dataset, theta_star: np.ndarray, fd_step: float = 1e-5
) -> DMEstimate:
    """Central-difference Jacobian of the EM map, the deterministic
    reference for the sem/spsa estimates."""
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    theta_star = np.asarray(theta_star, dtype=float)
    d = model.dim
    matrix = np.empty((d, d))
    for i in range(d):
        step = np.zeros(d)
        step[i] = fd_step * max(1.0, abs(theta_star[i]))
        m_plus = model.em_map(theta_star + step, data)
        m_minus = model.em_map(theta_star - step, data)
        matrix[i] = (m_plus - m_minus) / (2.0 * step[i])
    return DMEstimate(matrix=matrix, method="oracle_fd", iterations_used=2 * d)
