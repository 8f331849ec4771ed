"""Linear-Gaussian state-space model with unknown diagonal state noise.

    x_t = A x_{t-1} + w_t,   w_t ~ N(0, diag(theta))
    y_t = D x_t + v_t,       v_t ~ N(0, R)

A, D, R and the initial law N(mu, Sigma) of x_0 are known; the parameter is
the vector of state-noise variances. The observed record is (x_0, y_1..y_n):
the initial state is part of the data, so filtering and smoothing condition
on it with zero uncertainty, and the initial-state term of the complete-data
log-likelihood is a parameter-free constant that is dropped throughout
(with Sigma = 0 it is degenerate anyway).

The E step follows Shumway & Stoffer (1982): a Kalman filter (Joseph-form
covariance updates), the RTS backward pass, and the lag-one covariance
recursion produce the smoothed second-moment sums that both the Q-function
and the closed-form M step consume. The filter also yields the observed
log-likelihood through the Gaussian prediction-error decomposition; it is
used for EM stopping and as an oracle, never inside the estimators.

The per-step kernels are JIT-compiled (numba): Monte Carlo information
estimates need on the order of 10^5 smoother passes, which pushes plain
numpy loops into tens of minutes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .em import Dataset, EMModel
from .errors import DegeneratePosteriorError, FilterSingularityError, InvalidParameterError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class StateSpaceSpec:
    """Known quantities of the model: dynamics, measurement, and initial law."""

    transition: np.ndarray  # A, (p, p)
    measurement: np.ndarray  # D, (q, p)
    meas_cov: np.ndarray  # R, (q, q)
    init_mean: np.ndarray  # mu, (p,)
    init_cov: np.ndarray  # Sigma, (p, p)

    def __post_init__(self):
        a = np.array(self.transition, dtype=float)
        d = np.atleast_2d(np.array(self.measurement, dtype=float))
        r = np.atleast_2d(np.array(self.meas_cov, dtype=float))
        mu = np.array(self.init_mean, dtype=float).reshape(-1)
        sigma = np.array(self.init_cov, dtype=float)
        p = a.shape[0]
        if a.shape != (p, p):
            raise ValueError("transition matrix must be square")
        if d.shape[1] != p:
            raise ValueError("measurement matrix has wrong state dimension")
        q = d.shape[0]
        if r.shape != (q, q):
            raise ValueError("measurement covariance has wrong shape")
        if mu.shape != (p,) or sigma.shape != (p, p):
            raise ValueError("initial law has wrong shape")
        for m, name in ((r, "meas_cov"), (sigma, "init_cov")):
            if not np.allclose(m, m.T):
                raise ValueError(f"{name} must be symmetric")
            if np.min(np.linalg.eigvalsh(m)) < -1e-12:
                raise ValueError(f"{name} must be positive semi-definite")
        for field, value in (
            ("transition", a),
            ("measurement", d),
            ("meas_cov", r),
            ("init_mean", mu),
            ("init_cov", sigma),
        ):
            value.flags.writeable = False
            object.__setattr__(self, field, value)

    @property
    def p(self) -> int:
        return self.transition.shape[0]

    @property
    def q(self) -> int:
        return self.measurement.shape[0]


@dataclass(frozen=True)
class FilterResult:
    """Filtered and one-step-predicted moments, indexed t = 0..n.

    ``loglik`` is the full observed-data log-likelihood of y_1..y_n given
    x_0 (prediction-error decomposition, constants included). ``last_gain``
    is the Kalman gain of the final update, needed to seed the lag-one
    covariance recursion.
    """

    means: np.ndarray
    covs: np.ndarray
    pred_means: np.ndarray
    pred_covs: np.ndarray
    loglik: float
    last_gain: np.ndarray


@dataclass(frozen=True)
class SmootherResult:
    """Smoothed moments, indexed t = 0..n.

    ``lag_covs[t]`` is cov(x_t, x_{t-1} | data) for t = 1..n; entry 0 is
    unused and zero.
    """

    means: np.ndarray
    covs: np.ndarray
    lag_covs: np.ndarray


def make_dataset(x0, ys) -> Dataset:
    """Observed record (x_0, y_1..y_n) as an immutable dataset."""
    x0 = np.array(x0, dtype=float).reshape(-1)
    ys = np.atleast_2d(np.array(ys, dtype=float))
    if ys.shape[0] < 1:
        raise ValueError("need at least one measurement")
    if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(ys))):
        raise ValueError("observations must be finite")
    x0.flags.writeable = False
    ys.flags.writeable = False
    return Dataset(payload=(x0, ys), n=ys.shape[0])


def write_data(path, data: Dataset) -> None:
    """Header line carrying x_0, then one whitespace-separated y row per step."""
    x0, ys = data.payload
    with open(path, "w") as fh:
        fh.write(" ".join(f"{v:.17g}" for v in x0) + "\n")
        for row in ys:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_data(path) -> Dataset:
    with open(path) as fh:
        lines = [line.split() for line in fh if line.strip()]
    if len(lines) < 2:
        raise ValueError("data file needs a header line and at least one measurement row")
    x0 = np.array([float(v) for v in lines[0]])
    ys = np.array([[float(v) for v in row] for row in lines[1:]])
    return make_dataset(x0, ys)


@njit(cache=True)
def _filter_kernel(a, d, r, qdiag, x0, ys):
    n = ys.shape[0]
    p = a.shape[0]
    q = d.shape[0]
    qmat = np.zeros((p, p))
    for i in range(p):
        qmat[i, i] = qdiag[i]
    eye = np.eye(p)

    xf = np.empty((n + 1, p))
    pf = np.empty((n + 1, p, p))
    xp = np.empty((n + 1, p))
    pp = np.empty((n + 1, p, p))
    xf[0] = x0
    pf[0] = 0.0
    xp[0] = x0
    pp[0] = 0.0

    loglik = 0.0
    gain = np.zeros((p, q))
    bad_t = -1
    for t in range(1, n + 1):
        x_pred = a @ xf[t - 1]
        p_pred = a @ pf[t - 1] @ a.T + qmat
        p_pred = 0.5 * (p_pred + p_pred.T)

        innov = ys[t - 1] - d @ x_pred
        s = d @ p_pred @ d.T + r
        sign, logdet = np.linalg.slogdet(s)
        if sign <= 0 or not np.isfinite(logdet):
            bad_t = t
            break
        s_inv = np.linalg.inv(s)
        gain = p_pred @ d.T @ s_inv
        ikd = eye - gain @ d
        p_filt = ikd @ p_pred @ ikd.T + gain @ r @ gain.T

        xf[t] = x_pred + gain @ innov
        pf[t] = 0.5 * (p_filt + p_filt.T)
        xp[t] = x_pred
        pp[t] = p_pred
        loglik += -0.5 * (q * _LOG_2PI + logdet + innov @ s_inv @ innov)
    return xf, pf, xp, pp, loglik, gain, bad_t


@njit(cache=True)
def _smoother_kernel(a, d, xf, pf, xp, pp, last_gain):
    n = xf.shape[0] - 1
    p = a.shape[0]
    xs = np.empty((n + 1, p))
    ps = np.empty((n + 1, p, p))
    js = np.empty((n, p, p))
    xs[n] = xf[n]
    ps[n] = pf[n]
    for t in range(n - 1, -1, -1):
        # J_t = P_{t|t} A^T P_{t+1|t}^{-1}, via a solve on the transpose
        js[t] = np.linalg.solve(pp[t + 1].T, (pf[t] @ a.T).T).T
        xs[t] = xf[t] + js[t] @ (xs[t + 1] - xp[t + 1])
        cov = pf[t] + js[t] @ (ps[t + 1] - pp[t + 1]) @ js[t].T
        ps[t] = 0.5 * (cov + cov.T)

    lag = np.zeros((n + 1, p, p))
    lag[n] = (np.eye(p) - last_gain @ d) @ a @ pf[n - 1]
    for t in range(n - 1, 0, -1):
        lag[t] = pf[t] @ js[t - 1].T + js[t] @ (lag[t + 1] - a @ pf[t]) @ js[t - 1].T
    return xs, ps, lag


def _check_qdiag(spec: StateSpaceSpec, q_diag) -> np.ndarray:
    q_diag = np.asarray(q_diag, dtype=float)
    if q_diag.shape != (spec.p,):
        raise InvalidParameterError(
            f"expected {spec.p} state-noise variances, got shape {q_diag.shape}"
        )
    if not np.all(np.isfinite(q_diag)):
        raise InvalidParameterError(f"non-finite variance in {q_diag}")
    if np.any(q_diag <= 0.0):
        raise InvalidParameterError(f"state-noise variances must be positive, got {q_diag}")
    return q_diag


def kalman_filter(spec: StateSpaceSpec, q_diag, data: Dataset) -> FilterResult:
    """Forward pass conditioning on the observed x_0 with zero uncertainty."""
    q_diag = _check_qdiag(spec, q_diag)
    x0, ys = data.payload
    xf, pf, xp, pp, loglik, gain, bad_t = _filter_kernel(
        spec.transition, spec.measurement, spec.meas_cov, q_diag, x0, ys
    )
    if bad_t >= 0:
        raise FilterSingularityError(f"innovation covariance singular at step {bad_t}")
    return FilterResult(
        means=xf, covs=pf, pred_means=xp, pred_covs=pp, loglik=float(loglik), last_gain=gain
    )


def kalman_smoother(spec: StateSpaceSpec, q_diag, data: Dataset) -> SmootherResult:
    """RTS backward pass with lag-one cross-covariances."""
    filt = kalman_filter(spec, q_diag, data)
    xs, ps, lag = _smoother_kernel(
        spec.transition,
        spec.measurement,
        filt.means,
        filt.covs,
        filt.pred_means,
        filt.pred_covs,
        filt.last_gain,
    )
    return SmootherResult(means=xs, covs=ps, lag_covs=lag)


def _residual_moment(spec: StateSpaceSpec, smooth: SmootherResult) -> np.ndarray:
    """Sum over t of E[(x_t - A x_{t-1})(x_t - A x_{t-1})^T | data]."""
    a = spec.transition
    xs, ps, lag = smooth.means, smooth.covs, smooth.lag_covs
    s11 = ps[1:].sum(axis=0) + np.einsum("ti,tj->ij", xs[1:], xs[1:])
    s10 = lag[1:].sum(axis=0) + np.einsum("ti,tj->ij", xs[1:], xs[:-1])
    s00 = ps[:-1].sum(axis=0) + np.einsum("ti,tj->ij", xs[:-1], xs[:-1])
    c = s11 - s10 @ a.T - a @ s10.T + a @ s00 @ a.T
    return 0.5 * (c + c.T)


def m_step(spec: StateSpaceSpec, smooth: SmootherResult, data: Dataset) -> np.ndarray:
    """Closed-form update of the diagonal state-noise variances."""
    c = _residual_moment(spec, smooth)
    q_new = np.diag(c) / data.n
    if np.any(q_new <= 0.0):
        raise DegeneratePosteriorError(f"variance update collapsed to {q_new}")
    return q_new


def simulate(spec: StateSpaceSpec, q_diag, n: int, rng: np.random.Generator) -> Dataset:
    """Draw (x_0, y_1..y_n). Zero noise covariances are allowed here so
    degenerate check builds can exercise the deterministic recursion."""
    q_diag = np.asarray(q_diag, dtype=float)
    if q_diag.shape != (spec.p,) or np.any(q_diag < 0.0) or not np.all(np.isfinite(q_diag)):
        raise InvalidParameterError(f"invalid state-noise variances {q_diag}")
    if n < 1:
        raise ValueError("n must be at least 1")
    if np.any(spec.init_cov != 0.0):
        x0 = spec.init_mean + _psd_sqrt(spec.init_cov) @ rng.standard_normal(spec.p)
    else:
        x0 = spec.init_mean.copy()
    w = rng.standard_normal((n, spec.p)) * np.sqrt(q_diag)
    if np.any(spec.meas_cov != 0.0):
        v = rng.standard_normal((n, spec.q)) @ _psd_sqrt(spec.meas_cov).T
    else:
        v = np.zeros((n, spec.q))
    xs = np.empty((n + 1, spec.p))
    xs[0] = x0
    for t in range(1, n + 1):
        xs[t] = spec.transition @ xs[t - 1] + w[t - 1]
    ys = xs[1:] @ spec.measurement.T + v
    return make_dataset(x0, ys)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return v * np.sqrt(np.clip(w, 0.0, None)) @ v.T


class DiagonalNoiseStateSpace(EMModel):
    """EM problem for the state-noise variances of a fixed state-space spec.

    The E-step gradient is not provided: information estimates go through
    Q-value differences, exactly the situation the four-Q-value fallback
    exists for.
    """

    has_score = False
    has_loglik = True
    has_complete_info = False

    def __init__(self, spec: StateSpaceSpec):
        self.spec = spec
        self.dim = spec.p
        self.param_names = tuple(f"Q{i + 1}" for i in range(spec.p))

    def validate(self, theta) -> None:
        _check_qdiag(self.spec, theta)

    def loglik(self, theta, data: Dataset) -> float:
        return kalman_filter(self.spec, theta, data).loglik

    def q_value(self, theta, theta_cond, data: Dataset) -> float:
        """Expected complete-data log-likelihood (constant terms dropped).

        Smoothed moments are computed at ``theta_cond`` -- a full filter and
        smoother pass per call -- and substituted into the quadratic form.
        The measurement term does not involve the state-noise variances but
        is included so the value is the whole expected log-likelihood; it is
        omitted when R is singular (it is parameter-free either way).
        """
        theta = _check_qdiag(self.spec, theta)
        smooth = kalman_smoother(self.spec, theta_cond, data)
        c = _residual_moment(self.spec, smooth)
        n = data.n
        value = -0.5 * n * float(np.sum(np.log(theta))) - 0.5 * float(np.sum(np.diag(c) / theta))

        sign, logdet_r = np.linalg.slogdet(self.spec.meas_cov)
        if sign > 0:
            _, ys = data.payload
            d = self.spec.measurement
            resid = ys - smooth.means[1:] @ d.T
            r_inv = np.linalg.inv(self.spec.meas_cov)
            meas_quad = float(np.einsum("ti,ij,tj->", resid, r_inv, resid))
            meas_quad += float(np.einsum("jk,tkj->", d.T @ r_inv @ d, smooth.covs[1:]))
            value += -0.5 * n * logdet_r - 0.5 * meas_quad
        return value

    def em_map(self, theta, data: Dataset) -> np.ndarray:
        smooth = kalman_smoother(self.spec, theta, data)
        return m_step(self.spec, smooth, data)

    def sample_data(self, theta, n: int, rng: np.random.Generator) -> Dataset:
        _check_qdiag(self.spec, theta)
        return simulate(self.spec, theta, n, rng)


def benchmark_spec() -> StateSpaceSpec:
    """Three-state, single-measurement test instance from Cao (2013).

    x_0 = 0 exactly (Sigma = 0); only the first state coordinate is
    measured, with unit measurement noise.
    """
    return StateSpaceSpec(
        transition=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.8, 0.8, -0.8]]),
        measurement=np.array([[1.0, 0.0, 0.0]]),
        meas_cov=np.array([[1.0]]),
        init_mean=np.zeros(3),
        init_cov=np.zeros((3, 3)),
    )


# Reference approximation of (I(theta*)/n)^{-1} for the benchmark instance
# at theta* = (0.9372, 0.9863, 1.0536), n = 100, from Cao (2013). There is
# no closed form; this is a comparison target, not exact truth.
CAO_REFERENCE_THETA_STAR = np.array([0.9372, 0.9863, 1.0536])
CAO_REFERENCE_INVERSE_FIM = np.array(
    [
        [51.8934, -24.4471, -33.7404],
        [-24.4471, 59.4544, -3.36401],
        [-33.7404, -3.36401, 63.0565],
    ]
)
CAO_REFERENCE_THETA_STAR.flags.writeable = False
CAO_REFERENCE_INVERSE_FIM.flags.writeable = False
