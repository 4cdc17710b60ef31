"""DAG view of circuits: gate nodes, wire-labeled edges, virtual endpoints.

Every qubit's wire is a single directed path from the virtual start node to
the virtual end node; gate nodes sit on the paths of the wires they touch.
Layer indices are assigned greedily (each node goes to the earliest layer
after all of its predecessors).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .circuit import Circuit, CircuitError, GateInstance
from .gates import get_gate_set


class NodeKind(Enum):
    VSTART = "vstart"
    VEND = "vend"
    GATE = "gate"


@dataclass(frozen=True)
class DagNode:
    kind: NodeKind
    gate_index: int | None = None
    wires: tuple[int, ...] | None = None
    layer: int = 0
    # Parameters ride along so DAG round trips are lossless; they are never
    # part of the diffusion state.
    params: tuple[float, ...] = ()


@dataclass
class CircuitDAG:
    num_qubits: int
    gateset_id: str
    nodes: list[DagNode] = field(default_factory=list)
    edges: list[tuple[int, int, int]] = field(default_factory=list)  # (src, dst, wire)

    def gate_nodes(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.kind is NodeKind.GATE]

    def max_layer(self) -> int:
        return max((n.layer for n in self.nodes), default=0)


@dataclass(frozen=True)
class Violation:
    rule: str
    where: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    is_valid: bool
    violations: tuple[Violation, ...]

    @staticmethod
    def from_violations(violations) -> "ValidationReport":
        vs = tuple(violations)
        return ValidationReport(is_valid=not vs, violations=vs)


class ConversionError(CircuitError):
    """Raised when an invalid DAG is converted back to a circuit."""

    def __init__(self, report: ValidationReport):
        self.report = report
        first = report.violations[0] if report.violations else None
        detail = f"{first.rule} at {first.where}: {first.message}" if first else "unknown"
        super().__init__(f"DAG is not a valid circuit ({detail})")


def circuit_to_dag(circuit: Circuit) -> CircuitDAG:
    """Build the layered DAG whose per-wire paths follow the gate order."""
    dag = CircuitDAG(circuit.num_qubits, circuit.gateset_id)
    dag.nodes.append(DagNode(NodeKind.VSTART, layer=0))
    frontier = {w: 0 for w in range(circuit.num_qubits)}
    for inst in circuit.gates:
        node_id = len(dag.nodes)
        layer = 1 + max(dag.nodes[frontier[w]].layer for w in inst.wires)
        dag.nodes.append(
            DagNode(NodeKind.GATE, inst.gate_index, tuple(inst.wires), layer, tuple(inst.params))
        )
        for w in inst.wires:
            dag.edges.append((frontier[w], node_id, w))
            frontier[w] = node_id
    end_id = len(dag.nodes)
    end_layer = 1 + max(dag.nodes[i].layer for i in frontier.values()) if frontier else 1
    dag.nodes.append(DagNode(NodeKind.VEND, layer=end_layer))
    for w in range(circuit.num_qubits):
        dag.edges.append((frontier[w], end_id, w))
    return dag


def dag_to_circuit(dag: CircuitDAG) -> Circuit:
    """Emit gates in ascending (layer, node id) order; validates first."""
    report = validate_dag(dag)
    if not report.is_valid:
        raise ConversionError(report)
    order = sorted(dag.gate_nodes(), key=lambda i: (dag.nodes[i].layer, i))
    gates = tuple(
        GateInstance(dag.nodes[i].gate_index, dag.nodes[i].wires, dag.nodes[i].params)
        for i in order
    )
    return Circuit(dag.num_qubits, gates, dag.gateset_id)


def validate_dag(dag: CircuitDAG) -> ValidationReport:
    """Check the circuit-DAG rules; every failure is one report entry."""
    violations: list[Violation] = []
    n_nodes = len(dag.nodes)
    gateset = get_gate_set(dag.gateset_id)

    for k, (src, dst, wire) in enumerate(dag.edges):
        if not (0 <= src < n_nodes and 0 <= dst < n_nodes):
            violations.append(Violation("edge-endpoints", f"edge {k}", "endpoint out of range"))
        if not 0 <= wire < dag.num_qubits:
            violations.append(Violation("edge-wire", f"edge {k}", f"wire label {wire} out of range"))
    if violations:
        return ValidationReport.from_violations(violations)

    # Acyclicity and layer monotonicity. Layer order implies acyclicity, but
    # report cycles distinctly for graphs with broken layer indices.
    for k, (src, dst, _) in enumerate(dag.edges):
        if dag.nodes[dst].layer <= dag.nodes[src].layer:
            violations.append(
                Violation(
                    "layer-order",
                    f"edge {k}",
                    f"dst layer {dag.nodes[dst].layer} <= src layer {dag.nodes[src].layer}",
                )
            )
    if _has_cycle(n_nodes, dag.edges):
        violations.append(Violation("acyclic", "graph", "graph contains a directed cycle"))

    starts = [i for i, n in enumerate(dag.nodes) if n.kind is NodeKind.VSTART]
    ends = [i for i, n in enumerate(dag.nodes) if n.kind is NodeKind.VEND]
    if len(starts) != 1:
        violations.append(Violation("virtual-nodes", "graph", f"expected 1 VSTART, found {len(starts)}"))
    if len(ends) != 1:
        violations.append(Violation("virtual-nodes", "graph", f"expected 1 VEND, found {len(ends)}"))
    if len(starts) != 1 or len(ends) != 1 or violations:
        return ValidationReport.from_violations(violations)
    start, end = starts[0], ends[0]
    if dag.nodes[start].layer != 0:
        violations.append(Violation("virtual-nodes", f"node {start}", "VSTART must be at layer 0"))
    if dag.nodes[end].layer != dag.max_layer():
        violations.append(Violation("virtual-nodes", f"node {end}", "VEND must be at the final layer"))

    # Per-wire single path VSTART -> ... -> VEND.
    for w in range(dag.num_qubits):
        out_by_node: dict[int, list[int]] = {}
        in_by_node: dict[int, list[int]] = {}
        for k, (src, dst, wire) in enumerate(dag.edges):
            if wire != w:
                continue
            out_by_node.setdefault(src, []).append(k)
            in_by_node.setdefault(dst, []).append(k)
        ok = True
        for node, ks in out_by_node.items():
            if len(ks) > 1:
                violations.append(
                    Violation("wire-path", f"node {node}", f"multiple outgoing edges on wire {w}")
                )
                ok = False
        for node, ks in in_by_node.items():
            if len(ks) > 1:
                violations.append(
                    Violation("wire-path", f"node {node}", f"multiple incoming edges on wire {w}")
                )
                ok = False
        if in_by_node.get(start):
            violations.append(Violation("wire-path", f"node {start}", f"VSTART has incoming wire {w}"))
            ok = False
        if out_by_node.get(end):
            violations.append(Violation("wire-path", f"node {end}", f"VEND has outgoing wire {w}"))
            ok = False
        if not ok:
            continue
        # Walk the path and require it to cover every wire-w edge.
        n_edges_w = sum(1 for e in dag.edges if e[2] == w)
        seen = 0
        node = start
        while out_by_node.get(node):
            k = out_by_node[node][0]
            node = dag.edges[k][1]
            seen += 1
            if seen > n_edges_w:
                break
        if node != end or seen != n_edges_w:
            violations.append(
                Violation("wire-path", f"wire {w}", "edges do not form one VSTART->VEND path")
            )

    # Node arity / degree / wire-label consistency.
    in_wires: dict[int, list[int]] = {i: [] for i in range(n_nodes)}
    out_wires: dict[int, list[int]] = {i: [] for i in range(n_nodes)}
    for src, dst, wire in dag.edges:
        out_wires[src].append(wire)
        in_wires[dst].append(wire)
    for i, node in enumerate(dag.nodes):
        if node.kind is not NodeKind.GATE:
            continue
        if node.gate_index is None or not 0 <= node.gate_index < len(gateset):
            violations.append(Violation("gate-index", f"node {i}", f"bad gate index {node.gate_index}"))
            continue
        gate = gateset[node.gate_index]
        wires = node.wires or ()
        if len(wires) != gate.arity or len(set(wires)) != len(wires):
            violations.append(
                Violation("arity", f"node {i}", f"{gate.name} wires {wires} do not match arity {gate.arity}")
            )
            continue
        if any(not 0 <= w < dag.num_qubits for w in wires):
            violations.append(Violation("arity", f"node {i}", f"wire out of range in {wires}"))
            continue
        if len(in_wires[i]) != gate.arity or len(out_wires[i]) != gate.arity:
            violations.append(
                Violation(
                    "arity",
                    f"node {i}",
                    f"{gate.name} has in/out degree {len(in_wires[i])}/{len(out_wires[i])}, "
                    f"expected {gate.arity}",
                )
            )
        if sorted(in_wires[i]) != sorted(wires) or sorted(out_wires[i]) != sorted(wires):
            violations.append(
                Violation("wire-label", f"node {i}", f"edge labels do not match wires {wires}")
            )
    return ValidationReport.from_violations(violations)


def _has_cycle(n_nodes: int, edges) -> bool:
    adj: dict[int, list[int]] = {}
    indeg = [0] * n_nodes
    for src, dst, _ in edges:
        adj.setdefault(src, []).append(dst)
        indeg[dst] += 1
    queue = [i for i in range(n_nodes) if indeg[i] == 0]
    visited = 0
    while queue:
        node = queue.pop()
        visited += 1
        for nxt in adj.get(node, ()):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                queue.append(nxt)
    return visited != n_nodes


def canonical_form(circuit: Circuit) -> str:
    """Deterministic text key, invariant under same-layer emission order."""
    dag = circuit_to_dag(circuit)
    gateset = circuit.gate_set
    by_layer: dict[int, list[str]] = {}
    for i in dag.gate_nodes():
        node = dag.nodes[i]
        params = ",".join(f"{p:.6f}" for p in node.params)
        entry = f"{gateset[node.gate_index].name}@{','.join(map(str, node.wires))}@{params}"
        by_layer.setdefault(node.layer, []).append(entry)
    layers = ["|".join(sorted(by_layer[layer])) for layer in sorted(by_layer)]
    return f"{circuit.num_qubits};" + "/".join(layers)
