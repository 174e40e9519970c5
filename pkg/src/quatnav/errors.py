"""Exception hierarchy shared by every quatnav module."""

from __future__ import annotations


class QuatNavError(Exception):
    """Base class for all quatnav errors."""


class PreconditionError(QuatNavError, ValueError):
    """An argument violates a documented precondition."""


class QuaternionMeanAmbiguityError(QuatNavError):
    """The weighted quaternion mean has no unique dominant eigenvector."""

    def __init__(self, gap: float, message: str | None = None) -> None:
        self.gap = float(gap)
        super().__init__(message or f"ambiguous quaternion mean (eigen-gap {self.gap:.3e})")


class NotPositiveDefiniteError(QuatNavError):
    """A covariance stayed non positive definite after the jitter retries.

    ``pivot`` is the zero-based index of the failing Cholesky pivot and ``index``
    the position of the offending matrix inside a batch (``None`` for a single
    matrix).
    """

    def __init__(self, pivot: int, index: tuple[int, ...] | None = None, message: str | None = None) -> None:
        self.pivot = int(pivot)
        self.index = index
        where = "" if index is None else f" (batch index {index})"
        super().__init__(message or f"matrix not positive definite at pivot {self.pivot}{where}")


class FilterStepError(QuatNavError):
    """A numerical failure inside a filter, tagged with step and particle."""

    def __init__(self, step: int, particle: int | None, cause: Exception) -> None:
        self.step = step
        self.particle = particle
        who = "" if particle is None else f", particle {particle}"
        super().__init__(f"filter failed at step {step}{who}: {cause}")


class DatasetError(QuatNavError):
    """Malformed dataset content; carries file, line and column when known."""

    def __init__(self, message: str, file: str | None = None, line: int | None = None, column: str | None = None) -> None:
        self.file = file
        self.line = line
        self.column = column
        where = []
        if file is not None:
            where.append(str(file))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class OrderingError(DatasetError):
    """Timestamps are not in the required order."""


class ConfigError(QuatNavError):
    """Invalid configuration file or value."""
