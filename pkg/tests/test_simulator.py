import math

import numpy as np
import pytest

from conftest import make_circuit
from qfusion.circuit import Circuit, CircuitError
from qfusion.dataset import DatasetSpec, generate_random_circuit, record_rng
from qfusion.simulator import (
    DensityMatrix,
    SimulationError,
    StateVector,
    density_matrix,
    fidelity,
    is_meaningful,
    label,
    run_statevector,
)

SQ2 = 1.0 / math.sqrt(2.0)


def brute_force_state(circuit: Circuit) -> np.ndarray:
    """Independent oracle: expand each gate to a full 2^n matrix via index
    arithmetic (little-endian) and multiply in order."""
    n = circuit.num_qubits
    dim = 2 ** n
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    gateset = circuit.gate_set
    for inst in circuit.gates:
        u = gateset[inst.gate_index].unitary(inst.params)
        full = np.zeros((dim, dim), dtype=complex)
        k = len(inst.wires)
        for col in range(dim):
            loc = 0
            for b, w in enumerate(inst.wires):
                loc |= ((col >> w) & 1) << b
            for loc_out in range(2 ** k):
                amp = u[loc_out, loc]
                if amp == 0:
                    continue
                row = col
                for b, w in enumerate(inst.wires):
                    bit = (loc_out >> b) & 1
                    row = (row & ~(1 << w)) | (bit << w)
                full[row, col] += amp
        psi = full @ psi
    return psi


class TestRunStatevector:
    def test_hadamard(self):
        out = run_statevector(make_circuit("custom22", 1, [("h", (0,), ())]))
        assert np.allclose(out.amplitudes, [SQ2, SQ2])

    def test_x_on_wire0_little_endian(self):
        out = run_statevector(make_circuit("custom22", 2, [("x", (0,), ())]))
        expect = np.zeros(4)
        expect[1] = 1.0
        assert np.allclose(out.amplitudes, expect)

    def test_bell_state(self):
        out = run_statevector(
            make_circuit("custom22", 2, [("h", (0,), ()), ("cx", (0, 1), ())])
        )
        assert np.allclose(out.amplitudes, [SQ2, 0, 0, SQ2])

    def test_norm_preserved_on_random_circuits(self):
        spec = DatasetSpec("custom22", (3,), 20, 50, seed=2)
        for i in range(50):
            circuit = generate_random_circuit(spec, record_rng(2, i))
            out = run_statevector(circuit)
            assert abs(np.sum(np.abs(out.amplitudes) ** 2) - 1.0) < 1e-10

    def test_rz_inverse_cancels(self):
        circuit = make_circuit(
            "heron_p", 1,
            [("sx", (0,), ()), ("rz", (0,), (0.9,)), ("rz", (0,), (-0.9,))],
        )
        ref = make_circuit("heron_p", 1, [("sx", (0,), ())])
        assert np.allclose(
            run_statevector(circuit).amplitudes, run_statevector(ref).amplitudes, atol=1e-12
        )

    def test_qubit_cap(self):
        with pytest.raises(CircuitError):
            Circuit(11, (), "custom22")

    def test_qubit_cap_env_override(self, monkeypatch):
        monkeypatch.setenv("QFUSION_MAX_QUBITS", "12")
        c = Circuit(11, (), "custom22")
        assert c.num_qubits == 11
        monkeypatch.setenv("QFUSION_MAX_QUBITS", "abc")
        with pytest.raises(ValueError):
            Circuit(2, (), "custom22")


class TestDensityMatrixAndLabel:
    def test_empty_circuit(self):
        dm = density_matrix(Circuit(1, (), "custom22"))
        assert np.allclose(dm.entries, [[1, 0], [0, 0]])

    def test_h_density(self):
        dm = density_matrix(make_circuit("custom22", 1, [("h", (0,), ())]))
        assert np.allclose(dm.entries, np.full((2, 2), 0.5))

    def test_hh_uniform(self):
        dm = density_matrix(make_circuit("custom22", 2, [("h", (0,), ()), ("h", (1,), ())]))
        assert np.allclose(dm.entries, np.full((4, 4), 0.25))

    def test_label_empty_exact(self):
        for n in (1, 2, 3):
            value = label(Circuit(n, (), "custom22"))
            assert value.re == 1.0 and value.im == 0.0

    def test_label_h(self):
        value = label(make_circuit("custom22", 1, [("h", (0,), ())]))
        assert abs(value.re - 2.0) < 1e-12 and abs(value.im) < 1e-12

    def test_label_h_then_s_oracle(self):
        # Independent 2x2 computation: S H |0> = (|0> + i|1>)/sqrt(2).
        h = np.array([[SQ2, SQ2], [SQ2, -SQ2]], dtype=complex)
        s = np.diag([1, 1j])
        psi = s @ h @ np.array([1, 0], dtype=complex)
        expect = complex(np.sum(np.outer(psi, psi.conj())))
        got = label(make_circuit("custom22", 1, [("h", (0,), ()), ("s", (0,), ())]))
        assert abs(got.re - expect.real) < 1e-12
        assert abs(got.im - expect.imag) < 1e-12
        assert abs(got.re - 1.0) < 1e-12 and abs(got.im) < 1e-12

    def test_label_real_nonnegative(self):
        # Sum of a pure-state projector's entries is |sum(psi)|^2, so the
        # label is real and nonnegative; the imaginary part only carries
        # floating-point noise.
        for gateset_id in ("custom22", "heron_p"):
            spec = DatasetSpec(gateset_id, (2, 3), 10, 40, seed=14)
            for i in range(40):
                value = label(generate_random_circuit(spec, record_rng(14, i)))
                assert value.re >= 0.0
                assert abs(value.im) < 1e-10

    def test_density_invariants_random(self):
        for gateset_id in ("custom22", "heron_np", "heron_p"):
            spec = DatasetSpec(gateset_id, (2, 3), 10, 60, seed=4)
            for i in range(60):
                dm = density_matrix(generate_random_circuit(spec, record_rng(4, i)))
                e = dm.entries
                assert abs(np.trace(e) - 1.0) < 1e-10
                assert np.allclose(e, e.conj().T, atol=1e-10)
                assert np.linalg.eigvalsh(e).min() >= -1e-8

    def test_matches_brute_force_oracle(self):
        spec = DatasetSpec("custom22", (1, 2, 3), 12, 50, seed=8)
        for i in range(50):
            circuit = generate_random_circuit(spec, record_rng(8, i))
            psi = brute_force_state(circuit)
            rho = np.outer(psi, psi.conj())
            got = density_matrix(circuit)
            assert np.max(np.abs(got.entries - rho)) <= 1e-9
            oracle_meaningful = int(np.count_nonzero(np.abs(rho) > 1e-8)) >= 10
            assert is_meaningful(got) == oracle_meaningful


class TestMeaningfulAndFidelity:
    def test_empty_not_meaningful(self):
        assert not is_meaningful(density_matrix(Circuit(2, (), "custom22")))

    def test_hh_meaningful(self):
        dm = density_matrix(make_circuit("custom22", 2, [("h", (0,), ()), ("h", (1,), ())]))
        assert is_meaningful(dm)  # all 16 entries non-zero

    def test_single_qubit_never_meets_threshold(self):
        dm = density_matrix(make_circuit("custom22", 1, [("h", (0,), ())]))
        assert not is_meaningful(dm)  # 4 < 10

    def test_threshold_boundary(self):
        entries = np.zeros((4, 4), dtype=complex)
        entries[0, 0] = 1.0
        dm = DensityMatrix(2, entries)
        assert not is_meaningful(dm, threshold=2)
        entries2 = entries.copy()
        entries2[0, 0] = 1.0 - 1e-7
        entries2[1, 1] = 1e-7
        assert is_meaningful(DensityMatrix(2, entries2), threshold=2)

    def test_density_matrix_invariants_enforced(self):
        bad_trace = np.zeros((2, 2), dtype=complex)
        bad_trace[0, 0] = 0.9
        with pytest.raises(SimulationError):
            DensityMatrix(1, bad_trace)
        non_hermitian = np.array([[1.0, 0.5], [0.0, 0.0]], dtype=complex)
        with pytest.raises(SimulationError):
            DensityMatrix(1, non_hermitian)
        not_psd = np.array([[1.5, 0.0], [0.0, -0.5]], dtype=complex)
        with pytest.raises(SimulationError):
            DensityMatrix(1, not_psd)

    def test_fidelity_cases(self):
        zero = StateVector(1, np.array([1, 0], dtype=complex))
        one = StateVector(1, np.array([0, 1], dtype=complex))
        plus = StateVector(1, np.array([SQ2, SQ2], dtype=complex))
        assert fidelity(zero, zero) == 1.0
        assert fidelity(zero, one) == 0.0
        assert abs(fidelity(zero, plus) - 0.5) < 1e-12
        assert fidelity(plus, zero) == fidelity(zero, plus)

    def test_fidelity_dimension_mismatch(self):
        a = StateVector(1, np.array([1, 0], dtype=complex))
        b = StateVector(2, np.array([1, 0, 0, 0], dtype=complex))
        with pytest.raises(SimulationError):
            fidelity(a, b)

    def test_statevector_norm_invariant(self):
        with pytest.raises(SimulationError):
            StateVector(1, np.array([1.0, 1.0], dtype=complex))
