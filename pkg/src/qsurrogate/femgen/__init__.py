"""Synthetic frame-structure dataset generator standing in for a proprietary FE model."""

from .dataset import (
    ConditioningReport, Dataset, SensorChannel, SensorSpec, conditioning_diagnostic,
    conditioning_from_matrix, default_sensor_spec, extract_sensors, load_dataset, read_csv,
    read_npz, sample_dataset, sensor_map, write_csv, write_npz,
)
from .frame import (
    FrameConfig, FrameModel, Section, StaticSolver, assemble_stiffness, build_frame,
    local_stiffness, solve_static,
)
from .loads import LoadAssembler, LoadConfig, LoadScenario, load_vector, sample_scenarios

__all__ = [
    "ConditioningReport", "Dataset", "LoadAssembler", "FrameConfig", "FrameModel", "LoadConfig", "LoadScenario",
    "Section", "SensorChannel", "SensorSpec", "StaticSolver", "assemble_stiffness", "build_frame",
    "conditioning_diagnostic", "conditioning_from_matrix", "default_sensor_spec",
    "extract_sensors", "load_dataset", "load_vector", "local_stiffness", "read_csv", "read_npz",
    "sample_dataset", "sample_scenarios", "sensor_map", "solve_static", "write_csv", "write_npz",
]
