"""Import path."""

from typing import List

from seqsense._meta import __version__  # noqa: F401
from seqsense.calibration import calibrate_delays, calibrate_thresholds
from seqsense.config import ExperimentConfig, load_config
from seqsense.detectors import (
    EnergyDetectorParams,
    GaussianDetectorParams,
    Hypothesis,
    SpectralShapeParams,
)
from seqsense.fusion import Scheme, SchemeConfig, SprtThresholds, run_scheme
from seqsense.harness import run_experiment, sweep
from seqsense.manifest import Manifest

__all__: List[str] = [
    "EnergyDetectorParams",
    "ExperimentConfig",
    "GaussianDetectorParams",
    "Hypothesis",
    "Manifest",
    "Scheme",
    "SchemeConfig",
    "SpectralShapeParams",
    "SprtThresholds",
    "calibrate_delays",
    "calibrate_thresholds",
    "load_config",
    "run_experiment",
    "run_scheme",
    "sweep",
]
