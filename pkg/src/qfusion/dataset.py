"""Random training circuits, their labels, and dataset files.

File format (QFDS v1)::

    QFDS v1 gateset=<id> seed=<u64>
    <label_re> <label_im> <circuit text>
    ...

Labels are stored at 12 significant digits. Loading revalidates every
circuit and recomputes 1% of labels as a checksum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import simulator
from .circuit import Circuit, CircuitError, GateInstance, circuit_from_text, circuit_to_text, max_qubits, quantize_param
from .dag import circuit_to_dag, validate_dag
from .gates import get_gate_set
from .simulator import CircuitLabel

TWO_PI = 2.0 * math.pi
LABEL_CHECK_FRACTION = 0.01
LABEL_CHECK_TOL = 1e-6


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    gateset_id: str
    qubit_counts: tuple[int, ...]
    gates_per_circuit: int
    num_samples: int
    param_range: tuple[float, float] = (0.0, TWO_PI)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "qubit_counts", tuple(self.qubit_counts))
        get_gate_set(self.gateset_id)
        cap = max_qubits()
        if not self.qubit_counts:
            raise DatasetError("qubit_counts must be non-empty")
        if any(q < 1 or q > cap for q in self.qubit_counts):
            raise DatasetError(f"qubit_counts must lie in [1, {cap}], got {self.qubit_counts}")
        if self.gates_per_circuit < 0:
            raise DatasetError("gates_per_circuit must be >= 0")
        if self.num_samples < 0:
            raise DatasetError("num_samples must be >= 0")
        lo, hi = self.param_range
        if not hi > lo:
            raise DatasetError(f"param_range must be a nonempty interval, got {self.param_range}")


@dataclass(frozen=True)
class DatasetRecord:
    circuit: Circuit
    label: CircuitLabel


def record_rng(seed: int, index: int) -> np.random.Generator:
    """Independent per-record stream, derivable from (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, index)))


def generate_random_circuit(spec: DatasetSpec, rng: np.random.Generator) -> Circuit:
    """Uniform gates, wires (without replacement) and parameters."""
    gateset = get_gate_set(spec.gateset_id)
    n = int(rng.choice(np.asarray(spec.qubit_counts)))
    allowed = [i for i, g in enumerate(gateset.gates) if g.arity <= n]
    if not allowed:
        raise DatasetError(
            f"gate set {gateset.id} has no gates applicable to {n} qubit(s)"
        )
    lo, hi = spec.param_range
    instances = []
    for _ in range(spec.gates_per_circuit):
        gate_index = int(allowed[rng.integers(len(allowed))])
        gate = gateset[gate_index]
        wires = tuple(int(w) for w in rng.choice(n, size=gate.arity, replace=False))
        params = tuple(
            quantize_param(float(rng.uniform(lo, hi))) for _ in range(gate.num_params)
        )
        instances.append(GateInstance(gate_index, wires, params))
    return Circuit(n, tuple(instances), gateset.id)


def generate_records(spec: DatasetSpec):
    """Yield (index, DatasetRecord) with per-record derivable rng streams."""
    for index in range(spec.num_samples):
        circuit = generate_random_circuit(spec, record_rng(spec.seed, index))
        yield index, DatasetRecord(circuit, simulator.label(circuit))


def build_dataset(spec: DatasetSpec, path) -> int:
    """Write a QFDS v1 file; returns the number of records written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"QFDS v1 gateset={spec.gateset_id} seed={spec.seed}\n")
        for _, record in generate_records(spec):
            fh.write(
                f"{record.label.re:.12g} {record.label.im:.12g} "
                f"{circuit_to_text(record.circuit)}\n"
            )
            count += 1
    return count


def load_dataset(path) -> tuple[list[DatasetRecord], str, int]:
    """Read a QFDS file; returns (records, gateset_id, seed)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetError(f"{path}: empty file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "QFDS" or header[1] != "v1":
        raise DatasetError(f"{path}:1: bad header {lines[0]!r}")
    try:
        gateset_id = header[2].split("=", 1)[1]
        seed = int(header[3].split("=", 1)[1])
    except (IndexError, ValueError):
        raise DatasetError(f"{path}:1: bad header fields {lines[0]!r}") from None

    records: list[DatasetRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(" ", 2)
        if len(parts) != 3:
            raise DatasetError(f"{path}:{lineno}: expected 'label_re label_im circuit'")
        try:
            re_val, im_val = float(parts[0]), float(parts[1])
            circuit = circuit_from_text(parts[2], gateset_id)
        except (ValueError, CircuitError) as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
        report = validate_dag(circuit_to_dag(circuit))
        if not report.is_valid:
            raise DatasetError(f"{path}:{lineno}: circuit fails DAG validation")
        records.append(DatasetRecord(circuit, CircuitLabel(re_val, im_val)))

    check_every = max(1, round(1.0 / LABEL_CHECK_FRACTION))
    for i in range(0, len(records), check_every):
        rec = records[i]
        fresh = simulator.label(rec.circuit)
        err = math.hypot(fresh.re - rec.label.re, fresh.im - rec.label.im)
        if err > LABEL_CHECK_TOL:
            raise DatasetError(
                f"{path}:{i + 2}: stored label differs from recomputed by {err:.3g}"
            )
    return records, gateset_id, seed
