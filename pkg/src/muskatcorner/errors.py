"""Exceptions and warnings raised across the muskatcorner package."""


class MuskatError(Exception):
    """Base class for every domain failure of the package."""

    def __init__(self, message="Muskat corner analysis error"):
        super().__init__(message)


class ConfigurationError(MuskatError):
    """Custom exception for configuration-related errors."""

    def __init__(self, message="Configuration error"):
        super().__init__(message)


class ValidationError(MuskatError):
    """Raised when an assumption check fails and no override was given.

    Attributes:
        verdicts (list): The ordered verdict records collected so far.
    """

    def __init__(self, message="Assumption validation failed", verdicts=None):
        super().__init__(message)
        self.verdicts = list(verdicts or [])


class GeometryError(MuskatError):
    """Raised for domain specifications violating the geometric constraints."""

    def __init__(self, message="Invalid domain geometry"):
        super().__init__(message)


class LockError(MuskatError):
    """Raised when another run holds the lock of the output directory."""

    def __init__(self, message="output directory is locked"):
        super().__init__(message)


# ==========================
# Numerical failures
# ==========================


class NumericalFailure(MuskatError):
    """Parent of every failure produced by a numerical routine."""

    def __init__(self, message="Numerical failure"):
        super().__init__(message)


class BracketFailure(NumericalFailure):
    def __init__(self, message="bracket failure"):
        super().__init__(message)


class CountMismatch(NumericalFailure):
    def __init__(self, message="count mismatch"):
        super().__init__(message)


class BoundaryTooClose(NumericalFailure):
    """The counting contour passes too close to a zero; perturb the box."""

    def __init__(self, message="boundary too close to zero"):
        super().__init__(message)


class NoThreshold(NumericalFailure):
    def __init__(self, message="no threshold"):
        super().__init__(message)


class PoleProximity(NumericalFailure):
    def __init__(self, message="pole proximity"):
        super().__init__(message)


class PoleStripViolation(NumericalFailure):
    def __init__(self, message="pole strip violation"):
        super().__init__(message)


class SolverError(NumericalFailure):
    """Raised when the sparse linear solve fails or does not converge."""

    def __init__(self, message="linear solve failed"):
        super().__init__(message)


class DerivativeUnresolved(NumericalFailure):
    def __init__(self, message="derivative unresolved"):
        super().__init__(message)


class InsufficientDecayData(NumericalFailure):
    def __init__(self, message="insufficient decay data"):
        super().__init__(message)


class TubeViolation(NumericalFailure):
    """Raised when the interface displacement leaves the admissible tube."""

    def __init__(self, message="tube violation"):
        super().__init__(message)


class AssumptionOverrideWarning(UserWarning):
    """Emitted when a failed assumption is overridden on request."""
