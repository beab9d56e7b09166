"""Delayed-choice quantum eraser simulator."""

from .errors import (
    ComputeError,
    ConfigError,
    DomainError,
    EraserSimError,
    NodeError,
    NormError,
    PhaseUndefined,
    StepError,
)
from .geometry import DetectorId, ExperimentGeometry, default_geometry, detector_probabilities

__version__ = "0.1.0"
