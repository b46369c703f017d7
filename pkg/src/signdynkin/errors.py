"""Exception hierarchy.

Structural problems (shapes, set membership) subclass :class:`ValueError`;
numerical breakdowns subclass :class:`ArithmeticError` or
:class:`RuntimeError` so callers can tell bad input from bad luck.
"""


class DynkinError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(DynkinError, ValueError):
    """Malformed input: wrong shape, bad state set, invalid parameter."""


class ChainFileError(StructuralError):
    """A chain definition file could not be parsed."""


class InvalidGeneratorError(DynkinError, ValueError):
    """The generator failed validation; ``report`` holds the details."""

    def __init__(self, report, message=None):
        self.report = report
        super().__init__(message or f"invalid generator: {report.describe()}")


class NotPositiveDefiniteError(DynkinError, ArithmeticError):
    """Triangular factorization broke down at ``pivot`` (0-based)."""

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot} failed)")


class ConvergenceError(DynkinError, RuntimeError):
    """A series did not reach the requested tolerance within its term budget."""


class JumpCapExceeded(DynkinError, RuntimeError):
    """A simulated path was not absorbed within ``max_jumps`` jumps."""


class InsufficientSamplesError(DynkinError, RuntimeError):
    """A rejection estimator accepted no samples."""
