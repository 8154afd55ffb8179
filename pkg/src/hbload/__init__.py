"""Heartbeat load analytics on the Pearson plane and activity-type models."""

from .ingest import HeartSeries, hb_to_hr, hr_to_hb, mark_phases, parse_recording
from .moments import (
    DegenerateSample,
    InsufficientData,
    MomentAccumulator,
    MomentSummary,
    WindowAccumulator,
    accumulated_trajectory,
    batch_moments,
    window_trajectory,
)
from .pearson import PearsonPoint, classify_region, metric1, metric2, to_pearson

__version__ = "0.1.0"

__all__ = [
    "DegenerateSample", "HeartSeries", "InsufficientData", "MomentAccumulator", "MomentSummary",
    "PearsonPoint", "WindowAccumulator", "accumulated_trajectory", "batch_moments",
    "classify_region", "hb_to_hr", "hr_to_hb", "mark_phases", "metric1", "metric2",
    "parse_recording", "to_pearson", "window_trajectory", "__version__",
]
