"""Exception types shared across the package."""


class GlangevinError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(GlangevinError):
    """Input rejected because array dimensions do not match the system."""


class InvalidParameterError(GlangevinError):
    """Input rejected because a parameter violates its stated range."""


class NonFiniteStateError(GlangevinError):
    """A phase-space state contains NaN/Inf (integrator blow-up).

    Chain drivers catch this and record a diverged outcome instead of
    crashing; ``step_index`` is attached when known.
    """

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class DegenerateCovarianceError(GlangevinError):
    """The noise covariance is numerically singular (step size too small)."""

    def __init__(self, message, h=None):
        super().__init__(message)
        self.h = h


class UnstableSchemeError(GlangevinError):
    """The linearized one-step map has spectral radius >= 1 at this step size."""


class UnboundedMeasureError(GlangevinError):
    """The potential does not grow fast enough for a normalizable Gibbs weight."""


class NumericError(GlangevinError):
    """A numerical subroutine (factorization, eigensolve, quadrature) failed."""


class ConfigError(GlangevinError):
    """Experiment configuration is invalid; carries every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))
