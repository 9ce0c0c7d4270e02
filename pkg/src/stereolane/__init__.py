"""Stereo-vision lane detection with a dense vanishing-point field."""

from .errors import (RankDeficientError, RansacError, RoadProfileError, SingularProfileError, StageError,
                     StereoLaneError, VanishingPointError)
from .lanes import Lane, LaneSet
from .pipeline import PipelineConfig, PipelineReport, PipelineResult, bench, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig", "PipelineReport", "PipelineResult", "run_pipeline", "bench", "Lane", "LaneSet",
    "StereoLaneError", "StageError", "RoadProfileError", "VanishingPointError", "RankDeficientError",
    "RansacError", "SingularProfileError",
]
