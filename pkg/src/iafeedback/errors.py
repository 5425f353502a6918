"""Exception types raised by the simulation library."""


class IAFeedbackError(Exception):
    """Base class for every error raised by :mod:`iafeedback`."""


class ConfigError(IAFeedbackError, ValueError):
    """Invalid scenario or experiment parameters."""


class ChannelGenerationError(IAFeedbackError):
    """Channel draws kept exceeding the condition-number cap."""


class SingularChannelError(IAFeedbackError):
    """A channel matrix that must be inverted is (numerically) singular."""


class AlignmentError(IAFeedbackError):
    """Interference does not fit in the subspace left by the desired streams."""


class EigenGapError(IAFeedbackError):
    """Eigenvalues too close for first-order perturbation to be meaningful."""


class CodebookTooLargeError(IAFeedbackError):
    """Requested explicit codebook exceeds the enumeration cap."""


class InstanceTooLargeError(IAFeedbackError):
    """Exhaustive search requested on an instance that is too large."""
