"""Three-headed layerwise diffusion model over circuit DAGs.

A shared message-passing encoder summarizes a clean DAG prefix; three
independently parameterized heads predict, for the next layer, its node
count, its node gate types and wire assignments, and its incoming edges.
Training is teacher-forced layer by layer with the categorical noising
kernel from :mod:`qfusion.diffusion`; optimization is Adam over a small
reverse-mode engine, all in float64 for reproducibility.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from functools import lru_cache

from . import autodiff, diffusion
from .autodiff import Adam, Tensor, affine, concat, linear_combination, take_rows
from .circuit import max_qubits
from .dag import CircuitDAG, NodeKind, circuit_to_dag
from .dataset import DatasetRecord
from .diffusion import NoiseSchedule, cosine_schedule
from .gates import GateSet, get_gate_set

CHECKPOINT_MAGIC = b"QFCK"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    node_embed_dim: int = 64
    wire_embed_dim: int = 16
    message_rounds: int = 2
    hidden_dim: int = 128
    timestep_embed_dim: int = 16
    label_embed_dim: int = 16

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if self.node_embed_dim % 2 or self.timestep_embed_dim % 2:
            raise ValueError("embedding dims must be even for sinusoidal encodings")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    diffusion_steps: int = diffusion.DEFAULT_STEPS
    encoder: EncoderConfig = field(default_factory=EncoderConfig)


# -- wire-assignment categories ----------------------------------------------

def wire_vocab_size(num_qubits: int) -> int:
    """All single wires plus ordered distinct pairs: n + n(n-1)."""
    return num_qubits + num_qubits * (num_qubits - 1)


def wire_category(wires: tuple[int, ...], num_qubits: int) -> int:
    if len(wires) == 1:
        return wires[0]
    a, b = wires
    return num_qubits + a * (num_qubits - 1) + (b if b < a else b - 1)


def wire_tuple(category: int, num_qubits: int) -> tuple[int, ...]:
    if category < num_qubits:
        return (category,)
    rank = category - num_qubits
    a, rem = divmod(rank, num_qubits - 1)
    b = rem if rem < a else rem + 1
    return (a, b)


def wire_arity(category: int, num_qubits: int) -> int:
    return 1 if category < num_qubits else 2


def wire_mask(num_qubits: int, n_active: int, arity: int,
              available: set[int] | None = None) -> np.ndarray:
    """Boolean mask over the wire vocabulary for one gate's arity.

    `available` restricts single wires / pairs to wires still free in the
    layer under construction.
    """
    size = wire_vocab_size(num_qubits)
    mask = np.zeros(size, dtype=bool)
    pool = set(range(n_active)) if available is None else {w for w in available if w < n_active}
    if arity == 1:
        for w in pool:
            mask[w] = True
    else:
        for a in pool:
            for b in pool:
                if a != b:
                    mask[wire_category((a, b), num_qubits)] = True
    return mask


def sinusoidal_embedding(positions, dim: int) -> np.ndarray:
    pos = np.atleast_1d(np.asarray(positions, dtype=np.float64))
    return _sinusoidal_cached(tuple(pos.tolist()), dim)


@lru_cache(maxsize=4096)
def _sinusoidal_cached(positions: tuple[float, ...], dim: int) -> np.ndarray:
    pos = np.asarray(positions, dtype=np.float64)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    angles = pos[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


# -- prefix graphs -------------------------------------------------------------

@dataclass
class PrefixGraph:
    """Array view of a clean DAG prefix, ready for the encoder."""

    type_idx: np.ndarray     # (N,) gate index, or G (VSTART) / G+1 (VEND)
    wire_idx: np.ndarray     # (N,) wire category, or W for virtual nodes
    layers: np.ndarray       # (N,)
    a_in: np.ndarray         # (N, N); a_in[i, j] = 1 iff edge j -> i

    @property
    def num_nodes(self) -> int:
        return self.type_idx.size


def prefix_from_dag(dag: CircuitDAG, num_qubits_model: int, gateset: GateSet) -> PrefixGraph:
    if not dag.nodes:
        raise ValueError("prefix has no nodes (VSTART missing)")
    if not any(n.kind is NodeKind.VSTART for n in dag.nodes):
        raise ValueError("prefix has no VSTART node")
    n_nodes = len(dag.nodes)
    g = len(gateset)
    w_none = wire_vocab_size(num_qubits_model)
    type_idx = np.empty(n_nodes, dtype=np.intp)
    wire_idx = np.empty(n_nodes, dtype=np.intp)
    layers = np.empty(n_nodes, dtype=np.float64)
    for i, node in enumerate(dag.nodes):
        layers[i] = node.layer
        if node.kind is NodeKind.GATE:
            type_idx[i] = node.gate_index
            wire_idx[i] = wire_category(node.wires, num_qubits_model)
        else:
            type_idx[i] = g if node.kind is NodeKind.VSTART else g + 1
            wire_idx[i] = w_none
    a_in = np.zeros((n_nodes, n_nodes), dtype=np.float64)
    for src, dst, _ in dag.edges:
        a_in[dst, src] += 1.0
    return PrefixGraph(type_idx, wire_idx, layers, a_in)


@dataclass
class GraphEncoding:
    """Output of the encoder: pooled graph vector and per-node embeddings."""

    graph: Tensor        # (1, hidden + label_dim + t_dim)
    nodes: Tensor        # (N, hidden)
    t: int


# -- the model -------------------------------------------------------------------

class QFusionModel:
    def __init__(self, gateset_id: str, num_qubits: int, max_layer_width: int,
                 encoder: EncoderConfig | None = None,
                 schedule: NoiseSchedule | None = None,
                 seed: int = 0,
                 params: dict[str, Tensor] | None = None,
                 train_labels: np.ndarray | None = None,
                 metadata: dict | None = None):
        if num_qubits < 1 or num_qubits > max_qubits():
            raise ValueError(f"model qubit count {num_qubits} outside [1, {max_qubits()}]")
        if max_layer_width < 1:
            raise ValueError("max_layer_width must be >= 1")
        self.gateset = get_gate_set(gateset_id)
        self.gateset_id = self.gateset.id
        self.num_qubits = num_qubits
        self.max_layer_width = max_layer_width
        self.encoder = encoder or EncoderConfig()
        self.schedule = schedule or cosine_schedule()
        self.train_labels = (
            np.zeros((0, 3), dtype=np.float64) if train_labels is None
            else np.asarray(train_labels, dtype=np.float64).reshape(-1, 3)
        )
        self.metadata = dict(metadata or {})
        self.params = params if params is not None else self._init_params(seed)

    # parameter layout -------------------------------------------------------

    def _init_params(self, seed: int) -> dict[str, Tensor]:
        cfg = self.encoder
        rng = np.random.default_rng(seed)
        g = len(self.gateset)
        w = wire_vocab_size(self.num_qubits)
        d, ww, h = cfg.node_embed_dim, cfg.wire_embed_dim, cfg.hidden_dim
        gdim = h + cfg.label_embed_dim + cfg.timestep_embed_dim

        def normal(shape, scale):
            return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)

        def zeros(shape):
            return Tensor(np.zeros(shape), requires_grad=True)

        p: dict[str, Tensor] = {}
        p["enc.type_table"] = normal((g + 2, d), 0.5)
        p["enc.wire_table"] = normal((w + 1, ww), 0.5)
        p["enc.wire_proj"] = normal((ww, d), 1.0 / math.sqrt(ww))
        in_dim = d
        for r in range(cfg.message_rounds):
            p[f"enc.mp{r}.self"] = normal((in_dim, h), 1.0 / math.sqrt(in_dim))
            p[f"enc.mp{r}.in"] = normal((in_dim, h), 1.0 / math.sqrt(in_dim))
            p[f"enc.mp{r}.out"] = normal((in_dim, h), 1.0 / math.sqrt(in_dim))
            p[f"enc.mp{r}.bias"] = zeros((h,))
            in_dim = h
        p["enc.label_w"] = normal((2, cfg.label_embed_dim), 0.5)
        p["enc.label_b"] = zeros((cfg.label_embed_dim,))

        p["size.w1"] = normal((gdim, h), 1.0 / math.sqrt(gdim))
        p["size.b1"] = zeros((h,))
        p["size.w2"] = zeros((h, self.max_layer_width + 1))
        p["size.b2"] = zeros((self.max_layer_width + 1,))

        node_in = gdim + (d + ww) * 2
        p["node.gate_table"] = normal((g, d), 0.5)
        p["node.wire_table"] = normal((w, ww), 0.5)
        p["node.w1"] = normal((node_in, h), 1.0 / math.sqrt(node_in))
        p["node.b1"] = zeros((h,))
        p["node.gate_out_w"] = zeros((h, g))
        p["node.gate_out_b"] = zeros((g,))
        p["node.wire_out_w"] = zeros((h, w))
        p["node.wire_out_b"] = zeros((w,))

        edge_in = gdim + h + d + ww + 8
        p["edge.gate_table"] = normal((g, d), 0.5)
        p["edge.wire_table"] = normal((w, ww), 0.5)
        p["edge.bit_table"] = normal((2, 8), 0.5)
        p["edge.w1"] = normal((edge_in, h), 1.0 / math.sqrt(edge_in))
        p["edge.b1"] = zeros((h,))
        p["edge.w2"] = zeros((h, 2))
        p["edge.b2"] = zeros((2,))
        return p

    def head_param_names(self, prefix: str) -> list[str]:
        return [k for k in self.params if k.startswith(prefix + ".")]

    # encoder ------------------------------------------------------------------

    def encode_prefix(self, prefix: PrefixGraph) -> Tensor:
        """Per-node embeddings after message passing; (N, hidden)."""
        cfg = self.encoder
        p = self.params
        feats = take_rows(p["enc.type_table"], prefix.type_idx)
        feats = feats + take_rows(p["enc.wire_table"], prefix.wire_idx) @ p["enc.wire_proj"]
        feats = feats + Tensor(sinusoidal_embedding(prefix.layers, cfg.node_embed_dim))
        a_in = Tensor(prefix.a_in)
        a_out = Tensor(prefix.a_in.T.copy())
        h = feats
        for r in range(cfg.message_rounds):
            h = linear_combination(
                [
                    (h, p[f"enc.mp{r}.self"]),
                    (a_in @ h, p[f"enc.mp{r}.in"]),
                    (a_out @ h, p[f"enc.mp{r}.out"]),
                ],
                p[f"enc.mp{r}.bias"],
            ).tanh()
        return h

    def graph_encoding(self, node_embeds: Tensor, label: tuple[float, float], t: int) -> GraphEncoding:
        cfg = self.encoder
        n = node_embeds.data.shape[0]
        pooled = Tensor(np.full((1, n), 1.0 / n)) @ node_embeds
        label_vec = affine(
            Tensor(np.array([label], dtype=np.float64)),
            self.params["enc.label_w"], self.params["enc.label_b"],
        )
        t_vec = Tensor(sinusoidal_embedding([float(t)], cfg.timestep_embed_dim))
        return GraphEncoding(concat([pooled, label_vec, t_vec], axis=1), node_embeds, t)

    def encode(self, partial_dag: CircuitDAG, label: tuple[float, float], t: int) -> GraphEncoding:
        prefix = prefix_from_dag(partial_dag, self.num_qubits, self.gateset)
        return self.graph_encoding(self.encode_prefix(prefix), label, t)

    # heads ---------------------------------------------------------------------

    def predict_layer_size(self, encoding: GraphEncoding) -> Tensor:
        """Logits over {0..max_layer_width}; class 0 means stop."""
        p = self.params
        h = affine(encoding.graph, p["size.w1"], p["size.b1"]).tanh()
        return affine(h, p["size.w2"], p["size.b2"])

    def predict_nodes(self, encoding: GraphEncoding, noisy_gates, noisy_wires) -> tuple[Tensor, Tensor]:
        """Per-new-node clean-category logits for gates and wire assignments."""
        p = self.params
        noisy_gates = np.asarray(noisy_gates, dtype=np.intp)
        noisy_wires = np.asarray(noisy_wires, dtype=np.intp)
        m = noisy_gates.size
        e_gate = take_rows(p["node.gate_table"], noisy_gates)
        e_wire = take_rows(p["node.wire_table"], noisy_wires)
        own = concat([e_gate, e_wire], axis=1)
        # Leave-one-out layer context so same-layer nodes can coordinate.
        if m > 1:
            others = (np.ones((m, m)) - np.eye(m)) / (m - 1)
        else:
            others = np.zeros((1, 1))
        ctx = Tensor(others) @ own
        g_rep = take_rows(encoding.graph, np.zeros(m, dtype=np.intp))
        x = concat([g_rep, own, ctx], axis=1)
        h = affine(x, p["node.w1"], p["node.b1"]).tanh()
        gate_logits = affine(h, p["node.gate_out_w"], p["node.gate_out_b"])
        wire_logits = affine(h, p["node.wire_out_w"], p["node.wire_out_b"])
        return gate_logits, wire_logits

    def predict_edges(self, encoding: GraphEncoding, prior_positions, new_gates, new_wires,
                      noisy_bits) -> Tensor:
        """Bernoulli (2-class) logits per (new node, prior node) candidate.

        Candidates are ordered new-node-major: for new node i, all prior
        positions in order. `noisy_bits` has shape (m * P,).
        """
        p = self.params
        prior_positions = np.asarray(prior_positions, dtype=np.intp)
        new_gates = np.asarray(new_gates, dtype=np.intp)
        new_wires = np.asarray(new_wires, dtype=np.intp)
        bits = np.asarray(noisy_bits, dtype=np.intp)
        m, np_prior = new_gates.size, prior_positions.size
        cand_new = np.repeat(np.arange(m), np_prior)
        cand_prior = np.tile(prior_positions, m)
        g_rep = take_rows(encoding.graph, np.zeros(m * np_prior, dtype=np.intp))
        h_prior = take_rows(encoding.nodes, cand_prior)
        e_gate = take_rows(p["edge.gate_table"], new_gates[cand_new])
        e_wire = take_rows(p["edge.wire_table"], new_wires[cand_new])
        e_bit = take_rows(p["edge.bit_table"], bits)
        x = concat([g_rep, h_prior, e_gate, e_wire, e_bit], axis=1)
        h = affine(x, p["edge.w1"], p["edge.b1"]).tanh()
        return affine(h, p["edge.w2"], p["edge.b2"])


# -- teacher-forced training ------------------------------------------------------


@dataclass
class LayerTarget:
    size: int
    gate_cats: np.ndarray       # (m,)
    wire_cats: np.ndarray       # (m,)
    true_bits: np.ndarray       # (m, P) over prefix positions


@dataclass
class PlanStep:
    prefix: PrefixGraph
    target: LayerTarget


@dataclass
class RecordPlan:
    label: tuple[float, float]
    num_qubits: int
    steps: list[PlanStep]


def make_record_plan(record: DatasetRecord, num_qubits_model: int, gateset: GateSet) -> RecordPlan:
    dag = circuit_to_dag(record.circuit)
    gate_ids = dag.gate_nodes()
    by_layer: dict[int, list[int]] = {}
    for i in gate_ids:
        by_layer.setdefault(dag.nodes[i].layer, []).append(i)
    last_layer = max(by_layer, default=0)

    steps: list[PlanStep] = []
    prefix_ids = [i for i, n in enumerate(dag.nodes) if n.kind is NodeKind.VSTART]
    edge_set = {(src, dst) for src, dst, _ in dag.edges}
    for layer in range(1, last_layer + 2):
        sub = CircuitDAG(record.circuit.num_qubits, gateset.id)
        sub.nodes = [dag.nodes[i] for i in prefix_ids]
        pos = {orig: k for k, orig in enumerate(prefix_ids)}
        sub.edges = [
            (pos[s], pos[d], w) for s, d, w in dag.edges if s in pos and d in pos
        ]
        prefix = prefix_from_dag(sub, num_qubits_model, gateset)
        new_ids = sorted(by_layer.get(layer, []))
        gate_cats = np.array([dag.nodes[i].gate_index for i in new_ids], dtype=np.intp)
        wire_cats = np.array(
            [wire_category(dag.nodes[i].wires, num_qubits_model) for i in new_ids], dtype=np.intp
        )
        bits = np.zeros((len(new_ids), len(prefix_ids)), dtype=np.intp)
        for a, i in enumerate(new_ids):
            for b, j in enumerate(prefix_ids):
                if (j, i) in edge_set:
                    bits[a, b] = 1
        steps.append(PlanStep(prefix, LayerTarget(len(new_ids), gate_cats, wire_cats, bits)))
        prefix_ids = prefix_ids + new_ids
    return RecordPlan(record.label.as_tuple(), record.circuit.num_qubits, steps)


def step_losses(model: QFusionModel, plan: RecordPlan, step: PlanStep,
                rng: np.random.Generator) -> tuple[Tensor, Tensor | None, Tensor | None]:
    """CE losses (size, node, edge) for one teacher-forced layer step."""
    target = step.target
    node_embeds = model.encode_prefix(step.prefix)
    enc0 = model.graph_encoding(node_embeds, plan.label, 0)
    size_logits = model.predict_layer_size(enc0)
    size_ce = autodiff.cross_entropy(size_logits, np.array([target.size]))
    if target.size == 0:
        return size_ce, None, None

    t = int(rng.integers(1, model.schedule.total_steps + 1))
    enc_t = GraphEncoding(
        model.graph_encoding(node_embeds, plan.label, t).graph, node_embeds, t
    )
    g = len(model.gateset)
    w = wire_vocab_size(model.num_qubits)
    noisy_gates = diffusion.q_sample_array(target.gate_cats, g, t, model.schedule, rng)
    noisy_wires = diffusion.q_sample_array(target.wire_cats, w, t, model.schedule, rng)
    gate_logits, wire_logits = model.predict_nodes(enc_t, noisy_gates, noisy_wires)
    node_ce = (
        autodiff.cross_entropy(gate_logits, target.gate_cats)
        + autodiff.cross_entropy(wire_logits, target.wire_cats)
    ) * 0.5

    flat_bits = target.true_bits.reshape(-1)
    noisy_bits = diffusion.q_sample_array(flat_bits, 2, t, model.schedule, rng)
    prior_positions = np.arange(step.prefix.num_nodes)
    edge_logits = model.predict_edges(
        enc_t, prior_positions, target.gate_cats, target.wire_cats, noisy_bits
    )
    edge_ce = autodiff.cross_entropy(edge_logits, flat_bits)
    return size_ce, node_ce, edge_ce


def _mean(tensors: list[Tensor]) -> Tensor:
    total = tensors[0]
    for t in tensors[1:]:
        total = total + t
    return total / len(tensors)


def train(records: list[DatasetRecord], config: TrainConfig | None = None,
          seed: int = 0) -> QFusionModel:
    """Train the three heads plus encoder; deterministic given the seed."""
    config = config or TrainConfig()
    if not records:
        raise TrainingError("training dataset is empty")
    gateset_ids = {r.circuit.gateset_id for r in records}
    if len(gateset_ids) != 1:
        raise TrainingError(f"records mix gate sets: {sorted(gateset_ids)}")
    gateset = get_gate_set(next(iter(gateset_ids)))
    num_qubits = max(r.circuit.num_qubits for r in records)

    plans = [make_record_plan(r, num_qubits, gateset) for r in records]
    width = max((s.target.size for p in plans for s in p.steps), default=0)
    model = QFusionModel(
        gateset.id, num_qubits, max(width, 1),
        encoder=config.encoder,
        schedule=cosine_schedule(config.diffusion_steps),
        seed=seed,
        train_labels=np.array(
            [(r.circuit.num_qubits, r.label.re, r.label.im) for r in records], dtype=np.float64
        ),
    )
    optimizer = Adam(model.params, lr=config.learning_rate)
    rng = np.random.default_rng(seed)

    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(plans))
        sums = np.zeros(3)
        counts = np.zeros(3)
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            size_terms: list[Tensor] = []
            node_terms: list[Tensor] = []
            edge_terms: list[Tensor] = []
            for rid in batch:
                plan = plans[rid]
                for step in plan.steps:
                    size_ce, node_ce, edge_ce = step_losses(model, plan, step, rng)
                    size_terms.append(size_ce)
                    if node_ce is not None:
                        node_terms.append(node_ce)
                        edge_terms.append(edge_ce)
            loss = _mean(size_terms)
            if node_terms:
                loss = loss + _mean(node_terms) + _mean(edge_terms)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            for idx, terms in enumerate((size_terms, node_terms, edge_terms)):
                sums[idx] += sum(float(t.data) for t in terms)
                counts[idx] += len(terms)
        means = sums / np.maximum(counts, 1)
        history.append(
            {"size": float(means[0]), "node": float(means[1]),
             "edge": float(means[2]), "total": float(means.sum())}
        )
    model.metadata = {
        "epochs": config.epochs,
        "seed": seed,
        "final_loss": history[-1]["total"] if history else None,
        "loss_history": history,
    }
    return model


# -- checkpoint IO -----------------------------------------------------------------


def save_checkpoint(model: QFusionModel, path) -> None:
    tensors: list[tuple[str, np.ndarray]] = [
        (name, p.data) for name, p in model.params.items()
    ]
    tensors.append(("__schedule__", model.schedule.keep_probabilities))
    tensors.append(("__train_labels__", model.train_labels))
    header = {
        "gateset_id": model.gateset_id,
        "num_qubits": model.num_qubits,
        "max_layer_width": model.max_layer_width,
        "encoder": asdict(model.encoder),
        "metadata": model.metadata,
        "tensors": [[name, list(arr.shape)] for name, arr in tensors],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> QFusionModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise TrainingError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != CHECKPOINT_VERSION:
        raise TrainingError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    offset = 12 + header_len
    arrays: dict[str, np.ndarray] = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        block = raw[offset:offset + 8 * count]
        offset += 8 * count
        arrays[name] = np.frombuffer(block, dtype="<f8").reshape(shape).copy()
    params = {
        name: Tensor(arr, requires_grad=True)
        for name, arr in arrays.items() if not name.startswith("__")
    }
    return QFusionModel(
        header["gateset_id"],
        header["num_qubits"],
        header["max_layer_width"],
        encoder=EncoderConfig(**header["encoder"]),
        schedule=NoiseSchedule(arrays["__schedule__"]),
        params=params,
        train_labels=arrays["__train_labels__"],
        metadata=header["metadata"],
    )
