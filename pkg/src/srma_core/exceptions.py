"""Custom exceptions for the differentiable core."""


class DiffCoreError(Exception):
    """Base exception for differentiable core errors."""
    pass


class InvalidArgumentError(DiffCoreError, ValueError):
    """An argument falls outside an operation's precondition."""
    pass


class ShapeError(DiffCoreError):
    """Operand shapes are incompatible with the operation."""
    pass


class NonFiniteError(DiffCoreError):
    """An operation produced NaN or infinite values."""
    pass


class IndexOutOfRangeError(DiffCoreError):
    """A lookup id falls outside the table."""
    pass


class ParameterError(DiffCoreError):
    """Errors related to parameter registration or loading."""
    pass


class MissingGradientError(ParameterError):
    """A trainable parameter has no gradient at optimizer time."""
    pass


class CheckpointError(DiffCoreError):
    """Errors reading or writing checkpoint files."""
    pass


class GradCheckError(DiffCoreError):
    """Errors while running a finite-difference gradient check."""
    pass
