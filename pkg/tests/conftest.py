import itertools

import numpy as np
import pytest

from qfusion.circuit import Circuit, GateInstance
from qfusion.dag import CircuitDAG


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_circuit(gateset_id: str, num_qubits: int, gates: list[tuple[str, tuple, tuple]]):
    """Build a circuit from (name, wires, params) triples."""
    from qfusion.gates import get_gate_set

    gs = get_gate_set(gateset_id)
    instances = tuple(
        GateInstance(gs.index_of(name), tuple(wires), tuple(params))
        for name, wires, params in gates
    )
    return Circuit(num_qubits, instances, gateset_id)


def wire_sequences(circuit: Circuit) -> dict[int, list]:
    """Per-wire sequence of (gate, wires, params); the round-trip signature."""
    seqs: dict[int, list] = {w: [] for w in range(circuit.num_qubits)}
    for inst in circuit.gates:
        for w in inst.wires:
            seqs[w].append((inst.gate_index, inst.wires, inst.params))
    return seqs


def dags_isomorphic(d1: CircuitDAG, d2: CircuitDAG) -> bool:
    """Exhaustive wire-labeled DAG isomorphism over attribute-equal nodes."""
    if d1.num_qubits != d2.num_qubits:
        return False
    if len(d1.nodes) != len(d2.nodes) or len(d1.edges) != len(d2.edges):
        return False

    def node_key(n):
        params = tuple(round(p, 6) for p in n.params)
        return (n.kind.value, n.gate_index, n.wires, params, n.layer)

    groups1: dict = {}
    groups2: dict = {}
    for i, n in enumerate(d1.nodes):
        groups1.setdefault(node_key(n), []).append(i)
    for i, n in enumerate(d2.nodes):
        groups2.setdefault(node_key(n), []).append(i)
    if set(groups1) != set(groups2):
        return False
    if any(len(groups1[k]) != len(groups2[k]) for k in groups1):
        return False

    keys = sorted(groups1, key=repr)
    edge_set2 = set(d2.edges)

    def search(idx: int, mapping: dict) -> bool:
        if idx == len(keys):
            mapped = {(mapping[s], mapping[d], w) for s, d, w in d1.edges}
            return mapped == edge_set2
        k = keys[idx]
        for perm in itertools.permutations(groups2[k]):
            mapping.update(zip(groups1[k], perm))
            if search(idx + 1, mapping):
                return True
        for i in groups1[k]:
            mapping.pop(i, None)
        return False

    return search(0, {})
