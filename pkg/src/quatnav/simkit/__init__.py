"""Synthetic data, dataset files and error metrics."""

from .dataset import (ASL, NATIVE, Dataset, Trajectory, interpolate_trajectory, load_dataset, ns_to_decimal,
                      ns_to_seconds, write_dataset, write_errors, write_trajectory)
from .metrics import ErrorRecord, ErrorSummary, ErrorTable, compute_errors, summarize
from .sensors import synthesize_sensors
from .trajectory import TrajectorySpec, generate_trajectory

__all__ = [
    "ASL", "NATIVE", "Dataset", "Trajectory", "interpolate_trajectory", "load_dataset", "ns_to_decimal",
    "ns_to_seconds", "write_dataset", "write_errors", "write_trajectory", "ErrorRecord", "ErrorSummary",
    "ErrorTable", "compute_errors", "summarize", "synthesize_sensors", "TrajectorySpec", "generate_trajectory",
]
