"""Ancestral generation of circuit DAGs from a trained model.

Each outer iteration draws a layer size, reverse-diffuses the new layer's
gate types and wire assignments over the full noise schedule, then attaches
edges. In CONSTRAINED edge mode every node consumes the current frontier
edge of each of its wires, so outputs are valid by construction; in FREE
mode per-candidate edge bits are reverse-diffused and taken as-is, and
validity is measured, not enforced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff
from .circuit import Circuit, quantize_param
from .dag import CircuitDAG, DagNode, NodeKind, ValidationReport, dag_to_circuit, validate_dag
from .diffusion import posterior_step_array, sample_categorical
from .model import (
    GraphEncoding,
    QFusionModel,
    prefix_from_dag,
    wire_category,
    wire_mask,
    wire_tuple,
)

WIRE_HEAD = "wire_head"
WIRE_FREE = "wire_free"
CONSTRAINED = "constrained"
FREE = "free"

NEG_INF = float("-inf")


@dataclass(frozen=True)
class SamplerConfig:
    mode: str = WIRE_HEAD
    edge_mode: str = CONSTRAINED
    max_layers: int = 64
    num_qubits: int | None = None
    label: tuple[float, float] | None = None  # None draws from training labels
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (WIRE_HEAD, WIRE_FREE):
            raise ValueError(f"mode must be {WIRE_HEAD!r} or {WIRE_FREE!r}")
        if self.edge_mode not in (CONSTRAINED, FREE):
            raise ValueError(f"edge_mode must be {CONSTRAINED!r} or {FREE!r}")
        if self.mode == WIRE_FREE and self.edge_mode != CONSTRAINED:
            raise ValueError("wire-free sampling requires constrained edges "
                             "(wires exist only via path tracking)")
        if self.max_layers < 1:
            raise ValueError("max_layers must be >= 1")


@dataclass
class SampleResult:
    circuit: Circuit | None
    report: ValidationReport
    dag: CircuitDAG
    truncated: bool


def initial_wire_order(rng: np.random.Generator, num_qubits: int) -> tuple[int, ...]:
    """Uniform random slot-to-wire assignment used in wire-free mode."""
    return tuple(int(w) for w in rng.permutation(num_qubits))


def _draw_label(model: QFusionModel, config: SamplerConfig, num_qubits: int,
                rng: np.random.Generator) -> tuple[float, float]:
    if config.label is not None:
        return (float(config.label[0]), float(config.label[1]))
    rows = model.train_labels
    if rows.size:
        same_n = rows[rows[:, 0] == num_qubits]
        pool = same_n if same_n.size else rows
        row = pool[rng.integers(len(pool))]
        return (float(row[1]), float(row[2]))
    return (1.0, 0.0)


def _masked(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = logits.copy()
    out[~mask] = NEG_INF
    return out


def _commit_layer_nodes(model: QFusionModel, size: int, gate_logits: np.ndarray,
                        wire_logits: np.ndarray, num_active: int, mode: str,
                        slot_wires: tuple[int, ...], rng: np.random.Generator):
    """Final reverse step: draw (gate, wires) per node under availability masks."""
    gateset = model.gateset
    arities = np.array([g.arity for g in gateset.gates])
    available = set(range(num_active))
    placed: list[tuple[int, tuple[int, ...]]] = []
    for i in range(size):
        budget = len(available)
        if budget == 0:
            break
        gate_ok = arities <= min(budget, num_active, 2)
        if not gate_ok.any():
            break
        gate_index = sample_categorical(_masked(gate_logits[i], gate_ok), rng)
        arity = int(arities[gate_index])
        if mode == WIRE_HEAD:
            mask = wire_mask(model.num_qubits, num_active, arity, available)
            cat = sample_categorical(_masked(wire_logits[i], mask), rng)
            wires = wire_tuple(cat, model.num_qubits)
        else:
            free_slots = [s for s in range(num_active) if slot_wires[s] in available]
            picks = rng.choice(len(free_slots), size=arity, replace=False)
            wires = tuple(slot_wires[free_slots[int(k)]] for k in picks)
        available -= set(wires)
        placed.append((gate_index, wires))
    return placed


def _reverse_chain(model: QFusionModel, node_embeds, label, size: int,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, GraphEncoding]:
    """Reverse-diffuse gate and wire categories down to t=1 (uncommitted)."""
    g = len(model.gateset)
    w = model.num_qubits + model.num_qubits * (model.num_qubits - 1)
    x_gate = rng.integers(0, g, size=size)
    x_wire = rng.integers(0, w, size=size)
    schedule = model.schedule
    for t in range(schedule.total_steps, 1, -1):
        enc = model.graph_encoding(node_embeds, label, t)
        gate_logits, wire_logits = model.predict_nodes(enc, x_gate, x_wire)
        x_gate = posterior_step_array(gate_logits.data, x_gate, t, schedule, rng)
        x_wire = posterior_step_array(wire_logits.data, x_wire, t, schedule, rng)
    enc1 = model.graph_encoding(node_embeds, label, 1)
    gate_logits, wire_logits = model.predict_nodes(enc1, x_gate, x_wire)
    return gate_logits.data, wire_logits.data, enc1


def _free_edge_bits(model: QFusionModel, node_embeds, label, placed,
                    num_prior: int, rng: np.random.Generator) -> np.ndarray:
    """Reverse-diffuse one edge bit per (new node, prior node) candidate."""
    gate_cats = np.array([g for g, _ in placed], dtype=np.intp)
    wire_cats = np.array(
        [wire_category(ws, model.num_qubits) for _, ws in placed], dtype=np.intp
    )
    prior = np.arange(num_prior)
    bits = rng.integers(0, 2, size=len(placed) * num_prior)
    schedule = model.schedule
    for t in range(schedule.total_steps, 0, -1):
        enc = model.graph_encoding(node_embeds, label, t)
        logits = model.predict_edges(enc, prior, gate_cats, wire_cats, bits)
        bits = posterior_step_array(logits.data, bits, t, schedule, rng)
    return bits.reshape(len(placed), num_prior)


def sample_dag(model: QFusionModel, config: SamplerConfig,
               rng: np.random.Generator) -> tuple[CircuitDAG, bool]:
    num_active = config.num_qubits or model.num_qubits
    if not 1 <= num_active <= model.num_qubits:
        raise ValueError(
            f"requested {num_active} qubits, model supports 1..{model.num_qubits}"
        )
    label = _draw_label(model, config, num_active, rng)
    slot_wires = initial_wire_order(rng, num_active)

    dag = CircuitDAG(num_active, model.gateset_id)
    dag.nodes.append(DagNode(NodeKind.VSTART, layer=0))
    frontier = {w: 0 for w in range(num_active)}
    stopped = False

    with autodiff.no_grad():
        for layer in range(1, config.max_layers + 1):
            node_embeds = model.encode_prefix(
                prefix_from_dag(dag, model.num_qubits, model.gateset)
            )
            enc0 = model.graph_encoding(node_embeds, label, 0)
            size_logits = model.predict_layer_size(enc0).data[0]
            size = sample_categorical(size_logits, rng)
            if size == 0:
                stopped = True
                break

            gate_logits, wire_logits, _ = _reverse_chain(
                model, node_embeds, label, size, rng
            )
            placed = _commit_layer_nodes(
                model, size, gate_logits, wire_logits, num_active, config.mode,
                slot_wires, rng,
            )
            if not placed:
                stopped = True
                break

            num_prior = len(dag.nodes)
            pre_frontier = dict(frontier)
            if config.edge_mode == FREE:
                bits = _free_edge_bits(model, node_embeds, label, placed, num_prior, rng)

            for k, (gate_index, wires) in enumerate(placed):
                node_id = len(dag.nodes)
                gate = model.gateset[gate_index]
                params = tuple(
                    quantize_param(float(rng.uniform(0.0, 2.0 * math.pi)))
                    for _ in range(gate.num_params)
                )
                dag.nodes.append(DagNode(NodeKind.GATE, gate_index, wires, layer, params))
                if config.edge_mode == CONSTRAINED:
                    for w in wires:
                        dag.edges.append((frontier[w], node_id, w))
                else:
                    sources = {j for j in range(num_prior) if bits[k, j] == 1}
                    matched: set[int] = set()
                    filled: set[int] = set()
                    for w in wires:
                        f = pre_frontier[w]
                        if f in sources:
                            dag.edges.append((f, node_id, w))
                            matched.add(f)
                            filled.add(w)
                    for j in sorted(sources - matched):
                        unfilled = [w for w in wires if w not in filled]
                        w = unfilled[0] if unfilled else wires[0]
                        dag.edges.append((j, node_id, w))
                        filled.add(w)
                for w in wires:
                    frontier[w] = node_id

    end_id = len(dag.nodes)
    end_layer = dag.max_layer() + 1
    dag.nodes.append(DagNode(NodeKind.VEND, layer=end_layer))
    for w in range(num_active):
        dag.edges.append((frontier[w], end_id, w))
    return dag, not stopped


def sample_circuits(model: QFusionModel, config: SamplerConfig,
                    count: int) -> list[SampleResult]:
    """Draw `count` samples; invalid FREE-mode DAGs yield report-only entries."""
    rng = np.random.default_rng(config.seed)
    results: list[SampleResult] = []
    for _ in range(count):
        dag, truncated = sample_dag(model, config, rng)
        report = validate_dag(dag)
        circuit = dag_to_circuit(dag) if report.is_valid else None
        results.append(SampleResult(circuit, report, dag, truncated))
    return results
