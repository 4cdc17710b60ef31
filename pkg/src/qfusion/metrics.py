"""Batch evaluation: % valid, % unique, % meaningful, expressibility.

Uniqueness counts distinct canonical forms among valid circuits.
Expressibility is the KL divergence between the fidelity histogram of
random parameter pairs and the Haar fidelity density
P(F) = (N-1)(1-F)^(N-2), integrated per bin; values near 0 are better.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, GateInstance
from .dag import canonical_form, circuit_to_dag, validate_dag
from .sampler import SampleResult
from .simulator import StateVector, density_matrix, fidelity, is_meaningful, run_statevector

DEFAULT_NUM_PAIRS = 5000
DEFAULT_NUM_BINS = 75
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EvalOptions:
    num_pairs: int = DEFAULT_NUM_PAIRS
    num_bins: int = DEFAULT_NUM_BINS
    seed: int = 0


@dataclass
class EvalReport:
    total: int
    pct_valid: float
    pct_unique: float
    pct_meaningful: float
    pct_unique_among_meaningful: float
    expressibility_mean: float | None = None
    expressibility_meaningful: float | None = None
    per_qubit: dict[int, "EvalReport"] = field(default_factory=dict)


def _normalize_batch(batch) -> list[Circuit | None]:
    """Accepts SampleResults or Circuits; None marks an invalid sample."""
    circuits: list[Circuit | None] = []
    for item in batch:
        if isinstance(item, SampleResult):
            circuits.append(item.circuit if item.report.is_valid else None)
        elif isinstance(item, Circuit) or item is None:
            circuits.append(item)
        else:
            raise TypeError(f"batch items must be circuits or sample results, got {type(item)}")
    checked = []
    for c in circuits:
        if c is not None and not validate_dag(circuit_to_dag(c)).is_valid:
            c = None
        checked.append(c)
    return checked


def percent_valid(batch) -> float:
    circuits = _normalize_batch(batch)
    if not circuits:
        raise ValueError("empty batch")
    return 100.0 * sum(c is not None for c in circuits) / len(circuits)


def percent_unique(batch) -> float:
    valid = [c for c in _normalize_batch(batch) if c is not None]
    if not valid:
        raise ValueError("batch has no valid circuits")
    return 100.0 * len({canonical_form(c) for c in valid}) / len(valid)


def percent_meaningful(batch) -> float:
    valid = [c for c in _normalize_batch(batch) if c is not None]
    if not valid:
        raise ValueError("batch has no valid circuits")
    count = sum(is_meaningful(density_matrix(c)) for c in valid)
    return 100.0 * count / len(valid)


def haar_bin_masses(num_qubits: int, num_bins: int) -> np.ndarray:
    """Exact Haar fidelity mass per histogram bin on [0, 1]."""
    dim = 2 ** num_qubits
    edges = np.linspace(0.0, 1.0, num_bins + 1)
    survival = (1.0 - edges) ** (dim - 1)  # P(F >= f)
    return survival[:-1] - survival[1:]


def expressibility_from_fidelities(fids, num_qubits: int, num_bins: int = DEFAULT_NUM_BINS) -> float:
    fids = np.clip(np.asarray(fids, dtype=np.float64), 0.0, 1.0)
    counts, _ = np.histogram(fids, bins=num_bins, range=(0.0, 1.0))
    empirical = counts / counts.sum()
    haar = haar_bin_masses(num_qubits, num_bins)
    mask = empirical > 0
    return float(np.sum(empirical[mask] * np.log(empirical[mask] / haar[mask])))


def _with_params(circuit: Circuit, rng: np.random.Generator) -> Circuit:
    gateset = circuit.gate_set
    gates = []
    for inst in circuit.gates:
        n_params = gateset[inst.gate_index].num_params
        if n_params:
            params = tuple(float(rng.uniform(0.0, TWO_PI)) for _ in range(n_params))
            gates.append(GateInstance(inst.gate_index, inst.wires, params))
        else:
            gates.append(inst)
    return Circuit(circuit.num_qubits, tuple(gates), circuit.gateset_id)


def sample_fidelities(circuit_template: Circuit, num_pairs: int,
                      rng: np.random.Generator) -> np.ndarray:
    fids = np.empty(num_pairs)
    for k in range(num_pairs):
        a = run_statevector(_with_params(circuit_template, rng))
        b = run_statevector(_with_params(circuit_template, rng))
        fids[k] = fidelity(a, b)
    return fids


def expressibility(circuit_template: Circuit, num_pairs: int = DEFAULT_NUM_PAIRS,
                   num_bins: int = DEFAULT_NUM_BINS,
                   rng: np.random.Generator | None = None) -> float:
    """KL(empirical fidelity histogram || Haar) for a parametric template.

    Non-parametric templates are allowed; all fidelities collapse to 1 and
    the value is large rather than an error.
    """
    rng = rng or np.random.default_rng(0)
    fids = sample_fidelities(circuit_template, num_pairs, rng)
    return expressibility_from_fidelities(fids, circuit_template.num_qubits, num_bins)


def haar_random_state(num_qubits: int, rng: np.random.Generator) -> StateVector:
    dim = 2 ** num_qubits
    vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector(num_qubits, vec / np.linalg.norm(vec))


def _is_parametric(circuit: Circuit) -> bool:
    gateset = circuit.gate_set
    return any(gateset[i.gate_index].num_params for i in circuit.gates)


def evaluate_run(batch, options: EvalOptions | None = None) -> EvalReport:
    options = options or EvalOptions()
    circuits = _normalize_batch(batch)
    if not circuits:
        raise ValueError("empty batch")
    report = _evaluate(circuits, options, np.random.default_rng(options.seed))
    by_qubit: dict[int, list[Circuit | None]] = {}
    for c in circuits:
        if c is not None:
            by_qubit.setdefault(c.num_qubits, []).append(c)
    for n in sorted(by_qubit):
        report.per_qubit[n] = _evaluate(
            by_qubit[n], options, np.random.default_rng(options.seed + n)
        )
    return report


def _evaluate(circuits: list[Circuit | None], options: EvalOptions,
              rng: np.random.Generator) -> EvalReport:
    total = len(circuits)
    valid = [c for c in circuits if c is not None]
    if not valid:
        return EvalReport(total, 0.0, float("nan"), float("nan"), float("nan"))
    meaningful = [c for c in valid if is_meaningful(density_matrix(c))]
    pct_valid = 100.0 * len(valid) / total
    pct_unique = 100.0 * len({canonical_form(c) for c in valid}) / len(valid)
    pct_meaningful = 100.0 * len(meaningful) / len(valid)
    pct_unique_m = (
        100.0 * len({canonical_form(c) for c in meaningful}) / len(meaningful)
        if meaningful else float("nan")
    )

    def mean_expr(subset) -> float | None:
        templates = [c for c in subset if _is_parametric(c)]
        if not templates:
            return None
        values = [
            expressibility(c, options.num_pairs, options.num_bins, rng) for c in templates
        ]
        return float(np.mean(values))

    return EvalReport(
        total, pct_valid, pct_unique, pct_meaningful, pct_unique_m,
        expressibility_mean=mean_expr(valid),
        expressibility_meaningful=mean_expr(meaningful),
    )


def _fmt(value: float | None) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.2f}"


def render_text(report: EvalReport) -> str:
    header = f"{'Statistic':<28} {'% Valid':>8} {'% Unique':>9} {'% Meaningful':>13} {'Expressibility':>15}"
    lines = [header, "-" * len(header)]
    lines.append(
        f"{'All sampled circuits':<28} {_fmt(report.pct_valid):>8} {_fmt(report.pct_unique):>9} "
        f"{_fmt(report.pct_meaningful):>13} {_fmt(report.expressibility_mean):>15}"
    )
    lines.append(
        f"{'Meaningful subset':<28} {_fmt(report.pct_meaningful):>8} "
        f"{_fmt(report.pct_unique_among_meaningful):>9} {_fmt(100.0 if report.pct_meaningful else float('nan')):>13} "
        f"{_fmt(report.expressibility_meaningful):>15}"
    )
    for n, sub in sorted(report.per_qubit.items()):
        lines.append(
            f"{f'{n}-qubit circuits':<28} {_fmt(sub.pct_valid):>8} {_fmt(sub.pct_unique):>9} "
            f"{_fmt(sub.pct_meaningful):>13} {_fmt(sub.expressibility_mean):>15}"
        )
    lines.append(f"total sampled: {report.total}")
    return "\n".join(lines) + "\n"


def render_csv(report: EvalReport) -> str:
    def cell(value):
        return "" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.6f}"

    lines = ["statistic,% valid,% unique,% meaningful,expressibility"]
    lines.append(
        "all,"
        f"{cell(report.pct_valid)},{cell(report.pct_unique)},"
        f"{cell(report.pct_meaningful)},{cell(report.expressibility_mean)}"
    )
    lines.append(
        "meaningful,"
        f"{cell(report.pct_meaningful)},{cell(report.pct_unique_among_meaningful)},"
        f"{cell(100.0 if report.pct_meaningful else float('nan'))},{cell(report.expressibility_meaningful)}"
    )
    for n, sub in sorted(report.per_qubit.items()):
        lines.append(
            f"{n}-qubit,"
            f"{cell(sub.pct_valid)},{cell(sub.pct_unique)},"
            f"{cell(sub.pct_meaningful)},{cell(sub.expressibility_mean)}"
        )
    return "\n".join(lines) + "\n"
