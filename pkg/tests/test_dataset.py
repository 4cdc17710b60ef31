import math

import numpy as np
import pytest

import qfusion.dataset as ds
import qfusion.simulator as simulator
from qfusion.dag import canonical_form, circuit_to_dag, validate_dag
from qfusion.dataset import (
    DatasetError,
    DatasetSpec,
    build_dataset,
    generate_random_circuit,
    load_dataset,
    record_rng,
)
from qfusion.gates import get_gate_set


class TestGenerate:
    def test_deterministic_given_seed_and_index(self):
        spec = DatasetSpec("heron_np", (2,), 8, 1, seed=7)
        a = generate_random_circuit(spec, record_rng(7, 0))
        b = generate_random_circuit(spec, record_rng(7, 0))
        assert a.gates == b.gates and a.num_qubits == b.num_qubits

    def test_distinct_indices_differ(self):
        spec = DatasetSpec("custom22", (2,), 8, 2, seed=7)
        a = generate_random_circuit(spec, record_rng(7, 0))
        b = generate_random_circuit(spec, record_rng(7, 1))
        assert a.gates != b.gates

    def test_six_thousand_sample_batch(self):
        # 6k samples of 2-qubit 8-gate circuits, all valid, all 8 gates.
        spec = DatasetSpec("custom22", (2,), 8, 6000, seed=1)
        count = 0
        for i in range(spec.num_samples):
            circuit = generate_random_circuit(spec, record_rng(spec.seed, i))
            assert len(circuit.gates) == 8
            if i % 40 == 0:  # validation is the slow part; sample it
                assert validate_dag(circuit_to_dag(circuit)).is_valid
            count += 1
        assert count == 6000

    def test_gate_frequencies_within_3_sigma(self):
        # Mixed qubit counts: expectation and variance per gate follow the
        # documented sampling rule (uniform over gates with arity <= n).
        spec = DatasetSpec("heron_p", (1, 2, 3, 4, 5), 32, 6000, seed=3)
        gateset = get_gate_set("heron_p")
        counts = np.zeros(len(gateset))
        for i in range(spec.num_samples):
            circuit = generate_random_circuit(spec, record_rng(spec.seed, i))
            for inst in circuit.gates:
                counts[inst.gate_index] += 1
        total_gates = spec.num_samples * spec.gates_per_circuit
        freqs = counts / total_gates

        qubit_probs = {n: 1.0 / len(spec.qubit_counts) for n in spec.qubit_counts}
        for g_idx, gate in enumerate(gateset.gates):
            # Per-circuit count is Binomial(32, p_n) with p_n depending on n.
            mean_g = var_g = mean_sq = 0.0
            for n, pn in qubit_probs.items():
                offered = sum(1 for g in gateset.gates if g.arity <= n)
                p = (1.0 / offered) if gate.arity <= n else 0.0
                mu = spec.gates_per_circuit * p
                mean_g += pn * mu
                var_g += pn * spec.gates_per_circuit * p * (1 - p)
                mean_sq += pn * mu * mu
            var_g += mean_sq - mean_g ** 2
            sigma_freq = math.sqrt(spec.num_samples * var_g) / total_gates
            expected = mean_g / spec.gates_per_circuit
            assert abs(freqs[g_idx] - expected) <= 3 * sigma_freq, gate.name

    def test_single_qubit_circuits_skip_two_qubit_gates(self):
        spec = DatasetSpec("heron_p", (1,), 16, 20, seed=5)
        gateset = get_gate_set("heron_p")
        for i in range(20):
            circuit = generate_random_circuit(spec, record_rng(5, i))
            assert all(gateset[g.gate_index].arity == 1 for g in circuit.gates)

    def test_param_range(self):
        spec = DatasetSpec("heron_p", (1,), 50, 1, seed=9)
        circuit = generate_random_circuit(spec, record_rng(9, 0))
        params = [p for g in circuit.gates for p in g.params]
        assert params and all(0.0 <= p < 2 * math.pi for p in params)

    def test_spec_validation(self):
        with pytest.raises(DatasetError):
            DatasetSpec("heron_np", (), 8, 10)
        with pytest.raises(DatasetError):
            DatasetSpec("heron_np", (0,), 8, 10)
        with pytest.raises(DatasetError):
            DatasetSpec("heron_np", (2,), -1, 10)
        with pytest.raises(KeyError):
            DatasetSpec("bogus", (2,), 8, 10)


class TestFiles:
    def test_round_trip_lossless(self, tmp_path):
        spec = DatasetSpec("heron_p", (1, 2), 8, 100, seed=21)
        path = tmp_path / "data.qfds"
        assert build_dataset(spec, path) == 100
        records, gateset_id, seed = load_dataset(path)
        assert gateset_id == "heron_p" and seed == 21
        assert len(records) == 100
        for i, rec in enumerate(records):
            fresh = next(r for j, r in ds.generate_records(
                DatasetSpec("heron_p", (1, 2), 8, i + 1, seed=21)) if j == i)
            assert rec.circuit.gates == fresh.circuit.gates
        # Write -> load -> write is byte-identical.
        path2 = tmp_path / "data2.qfds"
        with open(path2, "w", newline="\n") as fh:
            fh.write(f"QFDS v1 gateset=heron_p seed=21\n")
            from qfusion.circuit import circuit_to_text
            for rec in records:
                fh.write(f"{rec.label.re:.12g} {rec.label.im:.12g} {circuit_to_text(rec.circuit)}\n")
        assert path.read_bytes() == path2.read_bytes()

    def test_label_stored_matches_recomputed(self, tmp_path):
        spec = DatasetSpec("heron_p", (2,), 8, 30, seed=2)
        path = tmp_path / "d.qfds"
        build_dataset(spec, path)
        records, _, _ = load_dataset(path)
        for rec in records:
            fresh = simulator.label(rec.circuit)
            assert math.hypot(fresh.re - rec.label.re, fresh.im - rec.label.im) < 1e-9

    def test_corrupt_wire_names_line(self, tmp_path):
        spec = DatasetSpec("heron_np", (2,), 4, 5, seed=3)
        path = tmp_path / "d.qfds"
        build_dataset(spec, path)
        lines = path.read_text().splitlines()
        lines[3] = lines[3].replace(":0:", ":9:", 1).replace(":1:", ":9:", 1)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError, match=":4"):
            load_dataset(path)

    def test_label_checksum_failure(self, tmp_path):
        spec = DatasetSpec("heron_np", (2,), 4, 5, seed=3)
        path = tmp_path / "d.qfds"
        build_dataset(spec, path)
        lines = path.read_text().splitlines()
        first = lines[1].split(" ", 2)
        lines[1] = f"{float(first[0]) + 0.5:.12g} {first[1]} {first[2]}"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError, match="label"):
            load_dataset(path)

    def test_checksum_samples_one_percent(self, tmp_path, monkeypatch):
        spec = DatasetSpec("heron_np", (2,), 4, 300, seed=6)
        path = tmp_path / "d.qfds"
        build_dataset(spec, path)
        calls = []
        original = simulator.label
        monkeypatch.setattr(ds.simulator, "label", lambda c: calls.append(1) or original(c))
        load_dataset(path)
        assert len(calls) == 3  # records 0, 100, 200

    def test_bad_header(self, tmp_path):
        path = tmp_path / "d.qfds"
        path.write_text("WRONG v9\n")
        with pytest.raises(DatasetError, match="header"):
            load_dataset(path)

    def test_distinct_seeds_mostly_distinct(self, capsys):
        # Sanity report, not a hard bound.
        forms = []
        for seed in (1, 2):
            spec = DatasetSpec("custom22", (2,), 8, 300, seed=seed)
            forms.append({
                canonical_form(generate_random_circuit(spec, record_rng(seed, i)))
                for i in range(300)
            })
        overlap = len(forms[0] & forms[1]) / 300
        print(f"seed-overlap fraction: {overlap:.4f}")
        assert overlap < 0.05  # loose regression guard; expected ~0
