"""Exception types shared across the package."""

from __future__ import annotations


class LaneMapError(Exception):
    """Base class for all package-specific errors."""


class InputDomainError(LaneMapError, ValueError):
    """An argument is outside the documented domain of an operation."""


class OutOfTileError(LaneMapError, ValueError):
    """A global point does not fall inside the tile footprint."""


class RoadParseError(LaneMapError, ValueError):
    """A road network file is malformed.  Carries the offending feature index."""

    def __init__(self, message: str, feature_index: int | None = None):
        super().__init__(message)
        self.feature_index = feature_index


class DegenerateFitError(LaneMapError, ValueError):
    """A shape fit window is too small or has no extent along the heading."""


class UndefinedMetricError(LaneMapError, ValueError):
    """A metric has no defined value (empty denominator)."""


class PipelineStageError(LaneMapError, RuntimeError):
    """A pipeline stage failed.  Carries the stage name and the item being processed."""

    def __init__(self, stage: str, item: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed on {item!r}: {cause}")
        self.stage = stage
        self.item = item
        self.cause = cause
