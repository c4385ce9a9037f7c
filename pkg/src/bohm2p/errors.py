"""Exception and warning types shared across the package."""


class Bohm2pError(Exception):
    """Base class for all package-specific errors."""


class NotNormalizable(Bohm2pError):
    """The model's density cannot be normalized over the requested coordinates."""


class NodeProximity(Bohm2pError):
    """The wave function is too close to a zero for the velocity to be reliable."""


class MaxStepsExceeded(Bohm2pError):
    """The integrator hit its step budget before reaching the final time."""


class UnsupportedModel(Bohm2pError):
    """The operation is not defined for this model variant."""


class QuadratureNotConverged(Bohm2pError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class EmptyEnsemble(Bohm2pError):
    """A statistic was requested on an ensemble with no usable trajectories."""


class ConfigError(Bohm2pError):
    """A scenario configuration is malformed; the message names the field."""


class PoorMixingWarning(UserWarning):
    """Metropolis acceptance rate fell outside the healthy range."""
