"""Room simulation: image-source RIRs, barge-in scenarios and datasets."""
from .dataset import DatasetPlan, build_dataset, mix64, read_manifest, write_manifest
from .geometry import RIR, RoomSpec, generate_rir, sabine_absorption, schroeder_rt60
from .scenario import ScenarioExample, ScenarioKind, ScenarioSpec, mix_at_sir, sample_scenario, synthesize_example

__all__ = [
    "DatasetPlan",
    "RIR",
    "RoomSpec",
    "ScenarioExample",
    "ScenarioKind",
    "ScenarioSpec",
    "build_dataset",
    "generate_rir",
    "mix64",
    "mix_at_sir",
    "read_manifest",
    "sabine_absorption",
    "sample_scenario",
    "schroeder_rt60",
    "synthesize_example",
    "write_manifest",
]
