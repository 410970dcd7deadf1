"""Exception hierarchy for aploco.

Every input problem is an ``AplocoError`` (a ``ValueError``), so callers that
only care about "bad input" can catch one type. ``InvariantViolation`` is kept
apart: it means the pipeline produced something its own contract forbids.
"""

from __future__ import annotations


class AplocoError(ValueError):
    """Base class for invalid input or unusable data."""


class ConfigError(AplocoError):
    pass


class DimensionMismatch(AplocoError):
    pass


class NonFiniteValue(AplocoError):
    pass


class NegativeWeight(AplocoError):
    pass


class DuplicateId(AplocoError):
    pass


class WeightSumViolation(AplocoError):
    pass


class StageMismatch(AplocoError):
    pass


class IdMismatch(AplocoError):
    pass


class ParseError(AplocoError):
    """A cell or file that could not be parsed, with 1-based coordinates."""

    def __init__(self, path: str, row: int, col: int, message: str) -> None:
        self.path = path
        self.row = row
        self.col = col
        self.detail = message
        super().__init__(f"{path}:{row}:{col}: {message}")


class SchemaViolation(AplocoError):
    pass


class UnknownLevel(SchemaViolation):
    pass


class MissingField(SchemaViolation):
    pass


class ZeroVariance(AplocoError):
    pass


class EmptyDataset(AplocoError):
    pass


class EmptyPartition(AplocoError):
    pass


class DegenerateImportance(AplocoError):
    pass


class UnmappedCriterion(AplocoError):
    pass


class ReportFormatError(AplocoError):
    pass


class NonFiniteLoss(AplocoError):
    """Training diverged; carries the epoch at which the loss stopped being finite."""

    def __init__(self, epoch: int, loss: float) -> None:
        self.epoch = epoch
        self.loss = loss
        super().__init__(
            f"training loss became non-finite ({loss!r}) at epoch {epoch}; "
            "lower the learning rate or the init scale"
        )


class InvariantViolation(RuntimeError):
    """A post-condition of the ranking pipeline failed."""
