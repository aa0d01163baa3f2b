"""Exception types shared across the package."""

from __future__ import annotations


class TrolleyWatchError(Exception):
    """Base class for all package-specific errors."""


class ScenarioError(TrolleyWatchError):
    """Scenario document is missing required keys or fails validation."""


class UnknownStationError(TrolleyWatchError):
    """Operation referenced a station id absent from the scenario."""


class UnknownCameraError(TrolleyWatchError):
    """Operation referenced a camera id absent from the scenario."""


class ObservationOrderError(TrolleyWatchError):
    """Observation timestamp is older than the station's last update."""


class EventLogOrderError(TrolleyWatchError):
    """Appended record would break per-station time ordering."""


class WeightsFormatError(TrolleyWatchError):
    """Weights file is corrupt or has an unsupported layout."""


class CorpusError(TrolleyWatchError):
    """Labeled patch corpus is missing files or has a malformed index."""


class TrainingDivergedError(TrolleyWatchError):
    """Training loss became non-finite; carrying on would be meaningless."""
