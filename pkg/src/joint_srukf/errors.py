"""Exception types raised across the package."""


class JointSRUKFError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(JointSRUKFError, ValueError):
    """Cholesky pivot fell below the positive-definiteness floor."""

    def __init__(self, index, pivot=None):
        self.index = index
        self.pivot = pivot
        msg = f"matrix is not positive definite (pivot {index}"
        if pivot is not None:
            msg += f" = {pivot:.3e}"
        super().__init__(msg + ")")


class DowndateBreakdown(JointSRUKFError, ValueError):
    """A rank-1 downdate would leave a non positive definite factor."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"rank-1 downdate broke down at column {index}")


class NonFiniteOutput(JointSRUKFError, FloatingPointError):
    """A model or library evaluation produced NaN or infinity."""


class ScaleFloorViolation(JointSRUKFError, ValueError):
    """The unscented scale n + lambda is below the configured floor."""


class MergeNotPD(JointSRUKFError, ValueError):
    """The merged two-pass covariance could not be factorized."""


class InsufficientSamples(JointSRUKFError, ValueError):
    """Too few samples remain after burn-in for the requested analysis."""


class ConfigError(JointSRUKFError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
