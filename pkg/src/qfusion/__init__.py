"""Layerwise discrete-diffusion generation of quantum circuits."""

from .circuit import Circuit, GateInstance, circuit_from_text, circuit_to_text
from .dag import CircuitDAG, ValidationReport, canonical_form, circuit_to_dag, dag_to_circuit, validate_dag
from .dataset import DatasetRecord, DatasetSpec, build_dataset, generate_random_circuit, load_dataset
from .diffusion import CategoricalVar, NoiseSchedule, ce_loss, cosine_schedule, posterior_step, q_sample
from .estimator import QFusionGenerator
from .gates import CUSTOM22, HERON_NP, HERON_P, GateDefinition, GateSet, get_gate_set
from .metrics import EvalOptions, EvalReport, evaluate_run, expressibility, percent_meaningful, percent_unique, percent_valid
from .model import EncoderConfig, QFusionModel, TrainConfig, TrainingError, load_checkpoint, save_checkpoint, train
from .qasm import export_qasm
from .sampler import SampleResult, SamplerConfig, sample_circuits, sample_dag
from .simulator import CircuitLabel, DensityMatrix, StateVector, density_matrix, fidelity, is_meaningful, label, run_statevector

__version__ = "0.1.0"

__all__ = [
    "Circuit", "GateInstance", "circuit_from_text", "circuit_to_text",
    "CircuitDAG", "ValidationReport", "canonical_form", "circuit_to_dag",
    "dag_to_circuit", "validate_dag",
    "DatasetRecord", "DatasetSpec", "build_dataset", "generate_random_circuit",
    "load_dataset",
    "CategoricalVar", "NoiseSchedule", "ce_loss", "cosine_schedule",
    "posterior_step", "q_sample",
    "QFusionGenerator",
    "CUSTOM22", "HERON_NP", "HERON_P", "GateDefinition", "GateSet", "get_gate_set",
    "EvalOptions", "EvalReport", "evaluate_run", "expressibility",
    "percent_meaningful", "percent_unique", "percent_valid",
    "EncoderConfig", "QFusionModel", "TrainConfig", "TrainingError",
    "load_checkpoint", "save_checkpoint", "train",
    "export_qasm",
    "SampleResult", "SamplerConfig", "sample_circuits", "sample_dag",
    "CircuitLabel", "DensityMatrix", "StateVector", "density_matrix",
    "fidelity", "is_meaningful", "label", "run_statevector",
]
