"""Exceptions raised by the package."""

from typing import Any


class BlowupError(Exception):
    """Base class of all errors raised by the package."""


class InvalidExponent(BlowupError, ValueError):
    """The exponents p or q are outside the admissible range."""


class InvalidParameter(BlowupError, ValueError):
    """An equation, solver or analysis parameter is out of range."""


class InvalidGrid(BlowupError, ValueError):
    """A spatial grid violates its invariants."""


class ConfigError(BlowupError, ValueError):
    """An experiment configuration does not validate."""


class SpatialDependence(BlowupError, ValueError):
    """The perturbation g depends on |x| where it must not."""


class OutOfDomain(BlowupError, ValueError):
    """A requested point lies outside the simulated region."""


class DomainCoverage(BlowupError, ValueError):
    """The grid does not cover the region an integral is taken over."""


class InsufficientGrowth(BlowupError, ValueError):
    """The amplitude never exceeds the fitting floor."""


class InsufficientRange(BlowupError, ValueError):
    """Too few samples, or too narrow a range, for a regression."""


class PreconditionError(BlowupError, ValueError):
    """An operation was called on an object in the wrong state."""


class SolverError(BlowupError, RuntimeError):
    """A numerical integration failed.

    Args:
        message:
            The error message.
        trajectory:
            The partial trajectory computed before the failure, if any.
    """

    def __init__(self, message: str, trajectory: Any = None) -> None:
        super().__init__(message)
        self.trajectory = trajectory


class NonFinite(SolverError):
    """The numerical state became non-finite."""


class DomainTooSmall(SolverError):
    """A disturbance reached the edge of the computational domain."""


class CutoffViolation(SolverError):
    """The similarity profile concentrates at the cutoff edges."""


class StepFailure(SolverError):
    """The soliton-center system became stiff or lost its ordering."""


class FitFailure(SolverError):
    """A least-squares fit produced no usable result."""


class MissingInput(BlowupError, FileNotFoundError):
    """A manifest or one of its artifacts is missing."""


class Mismatch(BlowupError):
    """A replayed run differs from the recorded one.

    Args:
        file:
            The artifact that differs.
        row:
            The index of the first differing row, or None if the difference is not
            row-based.
        detail:
            A human-readable description.
    """

    def __init__(self, file: str, row: int | None, detail: str) -> None:
        super().__init__(f"{file}: {detail}")
        self.file = file
        self.row = row
        self.detail = detail


class StageError(BlowupError):
    """An experiment pipeline stage failed.

    Args:
        stage:
            The name of the failing stage.
        message:
            The error message of the underlying exception.
    """

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"Stage {stage!r} failed: {message}")
        self.stage = stage
