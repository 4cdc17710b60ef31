"""OpenQASM 2 export.

Gates missing from qelib1.inc are emitted with standard definitions built
from qelib1 primitives, so the output parses against a plain OpenQASM 2
toolchain.
"""
from __future__ import annotations

from .circuit import Circuit

# Gates defined by qelib1.inc itself.
_QELIB1 = {
    "x", "y", "z", "h", "s", "sdg", "t", "tdg", "id", "rz",
    "cx", "cy", "cz", "ch", "swap",
}

# Definitions for everything else, keyed by gate name; order-sensitive
# (a definition may use a previously defined gate).
_EXTRA_DEFS: dict[str, str] = {
    "sx": "gate sx a { sdg a; h a; sdg a; }",
    "sxdg": "gate sxdg a { s a; h a; s a; }",
    "dcx": "gate dcx a,b { cx a,b; cx b,a; }",
    "iswap": "gate iswap a,b { s a; s b; h a; cx a,b; cx b,a; h b; }",
    "cs": "gate cs a,b { u1(pi/4) a; cx a,b; u1(-pi/4) b; cx a,b; u1(pi/4) b; }",
    "csdg": "gate csdg a,b { u1(-pi/4) a; cx a,b; u1(pi/4) b; cx a,b; u1(-pi/4) b; }",
    "csx": "gate csx a,b { h b; cu1(pi/2) a,b; h b; }",
    "rzx": "gate rzx(theta) a,b { h b; cx a,b; rz(theta) b; cx a,b; h b; }",
    "ecr": "gate ecr a,b { rzx(pi/4) a,b; x a; rzx(-pi/4) a,b; }",
}

_DEF_PREREQS = {"ecr": ("rzx",)}


class QasmExportError(ValueError):
    pass


def export_qasm(circuit: Circuit) -> str:
    """Render a circuit as an OpenQASM 2 program, preserving gate order."""
    gateset = circuit.gate_set
    used = [gateset[inst.gate_index].name for inst in circuit.gates]
    unsupported = sorted({n for n in used if n not in _QELIB1 and n not in _EXTRA_DEFS})
    if unsupported:
        raise QasmExportError(f"gates not expressible in OpenQASM 2: {', '.join(unsupported)}")

    needed: list[str] = []
    for name in used:
        if name in _QELIB1:
            continue
        for dep in _DEF_PREREQS.get(name, ()) + (name,):
            if dep not in needed:
                needed.append(dep)

    lines = ['OPENQASM 2.0;', 'include "qelib1.inc";']
    lines.extend(_EXTRA_DEFS[name] for name in needed)
    lines.append(f"qreg q[{circuit.num_qubits}];")
    for inst in circuit.gates:
        name = gateset[inst.gate_index].name
        args = ",".join(f"q[{w}]" for w in inst.wires)
        if inst.params:
            params = ",".join(repr(p) for p in inst.params)
            lines.append(f"{name}({params}) {args};")
        else:
            lines.append(f"{name} {args};")
    return "\n".join(lines) + "\n"
