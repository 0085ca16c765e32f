"""Exception types shared across the package."""


class DomainError(ValueError):
    """Inputs violate a mathematical precondition (wrong parameter region,
    nonzero mean where a zero-mean field is required, mismatched periods)."""


class ShapeError(ValueError):
    """Array or grid shapes are incompatible."""


class SingularModeError(RuntimeError):
    """A per-frequency linear block is too ill-conditioned to invert,
    which signals use of the direct solve too close to the wave region."""


class NoConvergence(RuntimeError):
    """Newton iteration hit its iteration cap before reaching tolerance."""

    def __init__(self, message, final_residual=None, iterations=None):
        super().__init__(message)
        self.final_residual = final_residual
        self.iterations = iterations


class ProbeFailure(RuntimeError):
    """A nonexistence probe trial did not relax back to the zero state."""


class ConfigError(ValueError):
    """Command-line or config-file inputs are invalid."""
