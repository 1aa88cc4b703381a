"""Exception types shared across the package."""


class SdeditError(Exception):
    """Base class for package errors."""


class DomainError(SdeditError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ResolutionError(SdeditError, ValueError):
    """The time discretization is too coarse for the schedule (e.g. beta*dt >= 1)."""


class ShapeMismatchError(SdeditError, ValueError):
    """Two arrays that must share a shape do not."""


class ProtocolError(SdeditError, RuntimeError):
    """An interactive protocol was driven out of order (e.g. feedback after accept)."""


class TrainingError(SdeditError, RuntimeError):
    """Training diverged; carries the step index at which it happened."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
