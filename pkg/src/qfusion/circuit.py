"""Circuit values and their line-oriented text serialization.

A circuit is an ordered list of gate instances over a named gate set. The
text form is one circuit per line::

    n_qubits|gate:wires:params;gate:wires:params;...

with wires comma-separated and parameters fixed-point with 9 decimals.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from .gates import GateSet, get_gate_set

DEFAULT_MAX_QUBITS = 10
_MAX_QUBITS_ENV = "QFUSION_MAX_QUBITS"


def max_qubits() -> int:
    """Simulation-feasibility bound on qubit counts (env-overridable)."""
    raw = os.environ.get(_MAX_QUBITS_ENV)
    if raw is None:
        return DEFAULT_MAX_QUBITS
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{_MAX_QUBITS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{_MAX_QUBITS_ENV} must be >= 1, got {value}")
    return value


class CircuitError(ValueError):
    """Raised for malformed circuits or serialized circuit text."""


@dataclass(frozen=True)
class GateInstance:
    """One applied gate: an index into the gate set, wires, and parameters."""

    gate_index: int
    wires: tuple[int, ...]
    params: tuple[float, ...] = ()


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[GateInstance, ...]
    gateset_id: str

    def __post_init__(self):
        cap = max_qubits()
        if self.num_qubits < 1:
            raise CircuitError(f"num_qubits must be >= 1, got {self.num_qubits}")
        if self.num_qubits > cap:
            raise CircuitError(
                f"num_qubits {self.num_qubits} exceeds the simulation cap {cap} "
                f"(set {_MAX_QUBITS_ENV} to raise it)"
            )
        gateset = get_gate_set(self.gateset_id)
        object.__setattr__(self, "gates", tuple(self.gates))
        for k, inst in enumerate(self.gates):
            self._check_instance(k, inst, gateset)

    def _check_instance(self, k: int, inst: GateInstance, gateset: GateSet) -> None:
        if not 0 <= inst.gate_index < len(gateset):
            raise CircuitError(f"gate {k}: index {inst.gate_index} not in gate set {gateset.id}")
        gate = gateset[inst.gate_index]
        if len(inst.wires) != gate.arity:
            raise CircuitError(
                f"gate {k} ({gate.name}): expected {gate.arity} wire(s), got {len(inst.wires)}"
            )
        if len(set(inst.wires)) != len(inst.wires):
            raise CircuitError(f"gate {k} ({gate.name}): wires must be distinct, got {inst.wires}")
        for w in inst.wires:
            if not 0 <= w < self.num_qubits:
                raise CircuitError(
                    f"gate {k} ({gate.name}): wire {w} out of range for {self.num_qubits} qubits"
                )
        if len(inst.params) != gate.num_params:
            raise CircuitError(
                f"gate {k} ({gate.name}): expected {gate.num_params} parameter(s), "
                f"got {len(inst.params)}"
            )

    @property
    def gate_set(self) -> GateSet:
        return get_gate_set(self.gateset_id)

    def gate_name(self, k: int) -> str:
        return self.gate_set[self.gates[k].gate_index].name

    def __len__(self) -> int:
        return len(self.gates)


def quantize_param(value: float) -> float:
    """Round an angle to the 9-decimal grid used by the text format."""
    return float(f"{value:.9f}")


def circuit_to_text(circuit: Circuit) -> str:
    gateset = circuit.gate_set
    parts = []
    for inst in circuit.gates:
        name = gateset[inst.gate_index].name
        wires = ",".join(str(w) for w in inst.wires)
        params = ",".join(f"{p:.9f}" for p in inst.params)
        parts.append(f"{name}:{wires}:{params}")
    return f"{circuit.num_qubits}|" + ";".join(parts)


def circuit_from_text(text: str, gateset_id: str) -> Circuit:
    gateset = get_gate_set(gateset_id)
    text = text.strip()
    head, sep, body = text.partition("|")
    if not sep:
        raise CircuitError(f"missing '|' separator in circuit text: {text!r}")
    try:
        num_qubits = int(head)
    except ValueError:
        raise CircuitError(f"bad qubit count {head!r}") from None
    instances = []
    if body:
        for k, part in enumerate(body.split(";")):
            fields = part.split(":")
            if len(fields) != 3:
                raise CircuitError(f"gate {k}: expected 'name:wires:params', got {part!r}")
            name, wires_s, params_s = fields
            try:
                gate_index = gateset.index_of(name)
            except KeyError as exc:
                raise CircuitError(f"gate {k}: {exc.args[0]}") from None
            try:
                wires = tuple(int(w) for w in wires_s.split(",")) if wires_s else ()
                params = tuple(float(p) for p in params_s.split(",")) if params_s else ()
            except ValueError:
                raise CircuitError(f"gate {k}: unparsable wires/params in {part!r}") from None
            instances.append(GateInstance(gate_index, wires, params))
    return Circuit(num_qubits, tuple(instances), gateset.id)
