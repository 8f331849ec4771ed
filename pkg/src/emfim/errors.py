"""Exception hierarchy shared across the package."""


class EmFimError(Exception):
    """Base class for all library-specific errors."""


class InvalidParameterError(EmFimError):
    """Parameter vector lies outside the model's valid domain."""


class BoundaryParameterError(InvalidParameterError):
    """Parameter sits on a boundary where the requested quantity is singular."""


class UnsupportedCapabilityError(EmFimError):
    """An optional model capability (score, log-likelihood, complete-data
    information) was requested but the model does not provide it."""


class DegeneratePosteriorError(EmFimError):
    """An M-step update is undefined, e.g. a mixture component owns no
    posterior mass or a variance update collapses to zero."""


class InvalidPerturbationError(EmFimError):
    """A perturbation vector contains a zero entry and cannot be inverted."""


class PerturbationOutOfDomainError(EmFimError):
    """A probe point theta +/- delta left the model domain.

    Carries the replicate index when raised inside a Monte Carlo loop so the
    failing draw can be identified.
    """

    def __init__(self, message: str, replicate: int | None = None):
        super().__init__(message)
        self.replicate = replicate


class CoordinateDegenerateError(EmFimError):
    """An EM iterate agrees with the MLE in some coordinate to within
    floating-point safety, so the difference-quotient is meaningless."""


class StabilizationError(EmFimError):
    """A difference-quotient sequence did not stabilize within the available
    EM iterates."""


class FilterSingularityError(EmFimError):
    """The innovation covariance in the Kalman filter is singular."""


class OracleFailureError(EmFimError):
    """A numerical quadrature oracle failed to reach its tolerance."""


class UndefinedMetricError(EmFimError):
    """A relative error was requested against a zero reference matrix."""


class NonConvergenceError(EmFimError):
    """An experiment required a converged EM fit but did not obtain one."""


class ConfigError(EmFimError):
    """An experiment configuration is malformed or inconsistent."""
