import re

import pytest

from conftest import make_circuit
from qfusion.circuit import Circuit
from qfusion.qasm import QasmExportError, export_qasm
from test_circuit_dag import fig3_circuit

GATE_STMT = re.compile(r"^[a-z][a-z0-9]*(\([^)]*\))? q\[\d+\](,q\[\d+\])?;$")
GATE_DEF = re.compile(r"^gate [a-z][a-z0-9]*(\([a-z]+\))? [a-z](,[a-z])? \{.*\}$")


def check_structure(text: str) -> list[str]:
    """Minimal OpenQASM 2 shape check; returns the gate statements."""
    lines = text.strip().splitlines()
    assert lines[0] == "OPENQASM 2.0;"
    assert lines[1] == 'include "qelib1.inc";'
    body = lines[2:]
    stmts = []
    seen_qreg = False
    for line in body:
        if line.startswith("gate "):
            assert not seen_qreg, "definitions must precede the register"
            assert GATE_DEF.match(line), line
        elif line.startswith("qreg "):
            assert re.match(r"^qreg q\[\d+\];$", line)
            seen_qreg = True
        else:
            assert seen_qreg
            assert GATE_STMT.match(line), line
            stmts.append(line)
    assert seen_qreg
    return stmts


def test_single_x():
    text = export_qasm(make_circuit("custom22", 1, [("x", (0,), ())]))
    stmts = check_structure(text)
    assert stmts == ["x q[0];"]


def test_empty_circuit_header_only():
    text = export_qasm(Circuit(2, (), "custom22"))
    assert check_structure(text) == []
    assert "qreg q[2];" in text


def test_fig3_statement_order():
    text = export_qasm(fig3_circuit())
    stmts = check_structure(text)
    assert stmts == [
        "x q[0];", "tdg q[1];", "h q[1];", "cx q[0],q[1];",
        "sdg q[1];", "ecr q[0],q[1];", "tdg q[0];", "cx q[1],q[0];",
    ]
    # ecr needs rzx, which must be defined first
    assert text.index("gate rzx") < text.index("gate ecr")


def test_non_qelib_gates_get_definitions():
    circuit = make_circuit(
        "custom22", 2,
        [("sx", (0,), ()), ("dcx", (0, 1), ()), ("iswap", (0, 1), ()),
         ("cs", (0, 1), ()), ("csx", (0, 1), ())],
    )
    text = export_qasm(circuit)
    for name in ("sx", "dcx", "iswap", "cs", "csx"):
        assert f"gate {name}" in text
    check_structure(text)


def test_parametric_gate():
    text = export_qasm(make_circuit("heron_p", 1, [("rz", (0,), (1.5,))]))
    assert "rz(1.5) q[0];" in text
    check_structure(text)


def test_whole_gate_sets_exportable():
    from qfusion.gates import GATESET_IDS, get_gate_set

    for gateset_id in GATESET_IDS:
        gs = get_gate_set(gateset_id)
        for k, gate in enumerate(gs.gates):
            wires = (0,) if gate.arity == 1 else (0, 1)
            params = (0.5,) if gate.num_params else ()
            circuit = make_circuit(gateset_id, 2, [(gate.name, wires, params)])
            check_structure(export_qasm(circuit))


def test_unsupported_gate_error(monkeypatch):
    import qfusion.qasm as qasm_mod

    monkeypatch.setattr(qasm_mod, "_EXTRA_DEFS", {k: v for k, v in qasm_mod._EXTRA_DEFS.items() if k != "ecr"})
    with pytest.raises(QasmExportError, match="ecr"):
        export_qasm(make_circuit("custom22", 2, [("ecr", (0, 1), ())]))
