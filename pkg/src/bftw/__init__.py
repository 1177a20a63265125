"""Signature-free BFT protocols over randomly sampled witness committees."""
from .params import ProtocolParams, derive_params
from .committees import WitnessSystem, run_pipeline, verify_witness_system
from .harness import ExperimentConfig, RunReport, emit_report, load_config, run_experiment

__all__ = [
    "ProtocolParams", "derive_params", "WitnessSystem", "run_pipeline", "verify_witness_system",
    "ExperimentConfig", "RunReport", "emit_report", "load_config", "run_experiment",
]
__version__ = "0.1.0"
