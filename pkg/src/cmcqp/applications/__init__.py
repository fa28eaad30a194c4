"""Waveform design and detection built on the core solvers."""

from .detection import (
    DetectionScenario,
    SingularCovarianceError,
    build_detection_scenario,
    mvdr_weights,
    snr_db,
    solve_detection,
)
from .waveform import (
    WaveformSet,
    build_shift_matrix,
    lag_weights,
    solve_wisl,
    wisl_coeffs,
    wisl_gradient,
    wisl_objective,
)
