"""Automatic VOT annotation and aspiration spectra."""

from .annotate import Analysis, analyze_clip, detect_burst, detect_frication, detect_voicing_onset
from .batch import (
    ANALYSIS_COLUMNS,
    TRAJECTORY_COLUMNS,
    GenerationAnalysis,
    analysis_row,
    analyze_clips,
    cap_tv_results,
    read_csv,
    write_csv,
)
from .features import AnalyzerConfig, FrameTrack, frame_features
from .spectral import (
    SpectralMoments,
    SpectralTrajectory,
    TrajectoryPoint,
    power_spectrum,
    spectral_moments,
    spectral_trajectory,
)

__all__ = [
    "Analysis", "analyze_clip", "detect_burst", "detect_frication", "detect_voicing_onset",
    "ANALYSIS_COLUMNS", "TRAJECTORY_COLUMNS", "GenerationAnalysis", "analysis_row", "analyze_clips",
    "cap_tv_results", "read_csv", "write_csv", "AnalyzerConfig", "FrameTrack", "frame_features",
    "SpectralMoments", "SpectralTrajectory", "TrajectoryPoint", "power_spectrum",
    "spectral_moments", "spectral_trajectory",
]
