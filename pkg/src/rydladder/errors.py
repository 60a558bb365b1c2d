"""Exception types shared across the package.

The CLI maps these to distinct exit codes (see `rydladder.cli`).
"""


class LadderError(Exception):
    """Base class for all rydladder errors."""


class ConfigError(LadderError):
    """Invalid parameter, geometry, schedule, or run configuration."""


class CapacityError(LadderError):
    """Requested system size exceeds a configured or hard limit."""


class AccuracyError(LadderError):
    """A solver could not reach the requested tolerance.

    Carries the best residual that was achieved, when known.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NormalizationError(LadderError):
    """State-vector norm is outside the accepted tolerance."""


class KinematicsError(LadderError):
    """Unphysical meson kinematics (|v| > 1)."""


class MalformedEventError(LadderError):
    """Parton event violates four-momentum invariants."""
