"""Fisher information matrices for EM-fitted models.

The estimator at the heart of the package approximates the expected or
observed Fisher information at an EM fixed point from simultaneous
perturbation probes of the E-step gradient, averaged over parametric-
bootstrap replicates. Classical routes (Louis, Oakes, supplemented EM) and
two reference models (a two-component Gaussian mixture and a linear-Gaussian
state-space model) are included for validation and comparison.
"""

from .baselines import DMEstimate, fd_dm, louis_fim, oakes_fim, sem_dm, sem_fim, spsa_dm
from .em import CompleteInfoParts, Dataset, EMConfig, EMModel, EMTrace, run_em
from .errors import (
    BoundaryParameterError,
    ConfigError,
    CoordinateDegenerateError,
    DegeneratePosteriorError,
    EmFimError,
    FilterSingularityError,
    InvalidParameterError,
    InvalidPerturbationError,
    NonConvergenceError,
    OracleFailureError,
    PerturbationOutOfDomainError,
    StabilizationError,
    UndefinedMetricError,
    UnsupportedCapabilityError,
)
from .gmm import GaussianMixture
from .report import ExperimentConfig, format_report, run_experiment, spectral_rel_error, write_report
from .rng import master_rng, replicate_streams
from .spsa import (
    FIMEstimate,
    HessianSample,
    SPSAConfig,
    estimate_fim,
    gen_perturbation,
    hessian_sample_from_gradients,
    hessian_samples,
    s_hat_from_q,
)
from .ssm import (
    CAO_REFERENCE_INVERSE_FIM,
    CAO_REFERENCE_THETA_STAR,
    DiagonalNoiseStateSpace,
    StateSpaceSpec,
    benchmark_spec,
    kalman_filter,
    kalman_smoother,
)
from .synthetic import QuadraticModel

__version__ = "0.1.0"

__all__ = [
    "BoundaryParameterError",
    "CAO_REFERENCE_INVERSE_FIM",
    "CAO_REFERENCE_THETA_STAR",
    "CompleteInfoParts",
    "ConfigError",
    "CoordinateDegenerateError",
    "Dataset",
    "DegeneratePosteriorError",
    "DiagonalNoiseStateSpace",
    "DMEstimate",
    "EMConfig",
    "EMModel",
    "EMTrace",
    "EmFimError",
    "ExperimentConfig",
    "FilterSingularityError",
    "FIMEstimate",
    "GaussianMixture",
    "HessianSample",
    "InvalidParameterError",
    "InvalidPerturbationError",
    "NonConvergenceError",
    "OracleFailureError",
    "PerturbationOutOfDomainError",
    "QuadraticModel",
    "SPSAConfig",
    "StabilizationError",
    "StateSpaceSpec",
    "UndefinedMetricError",
    "UnsupportedCapabilityError",
    "benchmark_spec",
    "estimate_fim",
    "fd_dm",
    "format_report",
    "gen_perturbation",
    "hessian_sample_from_gradients",
    "hessian_samples",
    "kalman_filter",
    "kalman_smoother",
    "louis_fim",
    "master_rng",
    "oakes_fim",
    "replicate_streams",
    "run_em",
    "run_experiment",
    "s_hat_from_q",
    "sem_dm",
    "sem_fim",
    "spectral_rel_error",
    "spsa_dm",
    "write_report",
]
