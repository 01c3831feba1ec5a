"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3, calibration range violations exit 4.
"""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration input."""


class NumericalError(RuntimeError):
    """A numerical invariant broke (NaN, lost norm, non-convergence)."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped without reaching its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoBarrierError(NumericalError):
    """No classically forbidden region exists at the given field strength."""


class CalibrationRangeError(RuntimeError):
    """A clock reading fell outside the invertible calibration branch."""


class CheckpointError(RuntimeError):
    """Checkpoint file is malformed, truncated, or of the wrong version."""
