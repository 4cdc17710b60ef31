"""Dense statevector and density-matrix simulation.

State indices are little-endian: qubit 0 is the least significant bit. The
density matrix of a simulated circuit is the pure-state projector, and its
complex entry sum is the scalar training label.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, max_qubits

MEANINGFUL_THRESHOLD = 10
MEANINGFUL_TOL = 1e-8


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2 ** self.num_qubits,):
            raise SimulationError(
                f"statevector for {self.num_qubits} qubit(s) must have length {2 ** self.num_qubits}"
            )
        object.__setattr__(self, "amplitudes", amps)
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > 1e-10:
            raise SimulationError(f"statevector norm^2 = {norm}, expected 1")


@dataclass(frozen=True)
class DensityMatrix:
    num_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        dim = 2 ** self.num_qubits
        if entries.shape != (dim, dim):
            raise SimulationError(f"density matrix must be {dim}x{dim}")
        object.__setattr__(self, "entries", entries)
        if abs(np.trace(entries) - 1.0) > 1e-10:
            raise SimulationError(f"trace {np.trace(entries)} != 1")
        if not np.allclose(entries, entries.conj().T, atol=1e-10):
            raise SimulationError("density matrix is not Hermitian")
        if float(np.linalg.eigvalsh(entries).min()) < -1e-8:
            raise SimulationError("density matrix is not positive semidefinite")

    def to_text(self) -> str:
        rows = []
        for row in self.entries:
            rows.append(" ".join(f"{v.real:+.6f}{v.imag:+.6f}j" for v in row))
        return "\n".join(rows)


@dataclass(frozen=True)
class CircuitLabel:
    re: float
    im: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.re, self.im)


def _apply_single(state: np.ndarray, u: np.ndarray, wire: int, n: int) -> np.ndarray:
    tensor = state.reshape([2] * n)
    axis = n - 1 - wire
    tensor = np.moveaxis(tensor, axis, 0)
    shape = tensor.shape
    tensor = u @ tensor.reshape(2, -1)
    return np.moveaxis(tensor.reshape(shape), 0, axis).reshape(-1)


def _apply_two(state: np.ndarray, u: np.ndarray, wires: tuple[int, int], n: int) -> np.ndarray:
    # Local index convention: first wire is the low bit, so axes are moved
    # as (second, first) to make the flattened front index = 2*b1 + b0.
    tensor = state.reshape([2] * n)
    a0, a1 = n - 1 - wires[0], n - 1 - wires[1]
    tensor = np.moveaxis(tensor, (a1, a0), (0, 1))
    shape = tensor.shape
    tensor = u @ tensor.reshape(4, -1)
    return np.moveaxis(tensor.reshape(shape), (0, 1), (a1, a0)).reshape(-1)


def run_statevector(circuit: Circuit) -> StateVector:
    """Apply the circuit's gates in order to the all-zeros state."""
    n = circuit.num_qubits
    if n > max_qubits():
        raise SimulationError(f"{n} qubits exceeds the simulation cap {max_qubits()}")
    gateset = circuit.gate_set
    state = np.zeros(2 ** n, dtype=complex)
    state[0] = 1.0
    for k, inst in enumerate(circuit.gates):
        gate = gateset[inst.gate_index]
        if len(inst.params) != gate.num_params:
            raise SimulationError(f"gate {k} ({gate.name}): missing parameter")
        u = gate.unitary(inst.params)
        if gate.arity == 1:
            state = _apply_single(state, u, inst.wires[0], n)
        else:
            state = _apply_two(state, u, (inst.wires[0], inst.wires[1]), n)
    return StateVector(n, state)


def density_matrix(circuit: Circuit) -> DensityMatrix:
    psi = run_statevector(circuit).amplitudes
    return DensityMatrix(circuit.num_qubits, np.outer(psi, psi.conj()))


def label(circuit: Circuit) -> CircuitLabel:
    """Complex sum of all density-matrix entries, as (re, im)."""
    total = complex(np.sum(density_matrix(circuit).entries))
    return CircuitLabel(float(total.real), float(total.imag))


def is_meaningful(
    dm: DensityMatrix,
    threshold: int = MEANINGFUL_THRESHOLD,
    tol: float = MEANINGFUL_TOL,
) -> bool:
    """True when at least `threshold` entries have magnitude above `tol`."""
    return int(np.count_nonzero(np.abs(dm.entries) > tol)) >= threshold


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.num_qubits != b.num_qubits:
        raise SimulationError(
            f"fidelity needs equal qubit counts, got {a.num_qubits} and {b.num_qubits}"
        )
    overlap = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(1.0, max(0.0, overlap)))
