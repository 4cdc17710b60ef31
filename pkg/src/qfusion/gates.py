"""Gate definitions and the fixed gate sets used for circuit generation.

Conventions:
    - Qubit ordering is little-endian: qubit 0 is the least significant bit
      of a computational-basis index.
    - For two-qubit gates the first wire of an instance is the least
      significant bit of the local 4x4 matrix index, so ``CX(control, target)``
      has its control on the first wire.
    - Matrices follow the OpenQASM standard gate library.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

CUSTOM22 = "custom22"
HERON_NP = "heron_np"
HERON_P = "heron_p"

GATESET_IDS = (CUSTOM22, HERON_NP, HERON_P)

_SQ2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class GateDefinition:
    """A named unitary acting on 1 or 2 qubits, optionally parametric."""

    name: str
    arity: int
    num_params: int
    _matrix_fn: Callable[[Sequence[float]], np.ndarray] = field(repr=False)

    def unitary(self, params: Sequence[float] = ()) -> np.ndarray:
        if len(params) != self.num_params:
            raise ValueError(
                f"gate {self.name} expects {self.num_params} parameter(s), got {len(params)}"
            )
        mat = np.asarray(self._matrix_fn(list(params)), dtype=complex)
        dim = 2 ** self.arity
        if mat.shape != (dim, dim):
            raise ValueError(f"gate {self.name} matrix has shape {mat.shape}, expected {(dim, dim)}")
        return mat


def _const(mat: list[list[complex]]) -> Callable[[Sequence[float]], np.ndarray]:
    frozen = np.array(mat, dtype=complex)
    frozen.setflags(write=False)
    return lambda params: frozen


def _rz(params: Sequence[float]) -> np.ndarray:
    theta = params[0]
    return np.array(
        [[cmath.exp(-0.5j * theta), 0.0], [0.0, cmath.exp(0.5j * theta)]], dtype=complex
    )


_T_PHASE = cmath.exp(1j * math.pi / 4)

_X = [[0, 1], [1, 0]]
_Y = [[0, -1j], [1j, 0]]
_Z = [[1, 0], [0, -1]]
_H = [[_SQ2, _SQ2], [_SQ2, -_SQ2]]
_S = [[1, 0], [0, 1j]]
_SDG = [[1, 0], [0, -1j]]
_T = [[1, 0], [0, _T_PHASE]]
_TDG = [[1, 0], [0, _T_PHASE.conjugate()]]
_ID = [[1, 0], [0, 1]]
_SX = [[0.5 + 0.5j, 0.5 - 0.5j], [0.5 - 0.5j, 0.5 + 0.5j]]
_SXDG = [[0.5 - 0.5j, 0.5 + 0.5j], [0.5 + 0.5j, 0.5 - 0.5j]]

# Two-qubit matrices in the local basis |w1 w0> with the first wire (control,
# where applicable) as the low bit.
_CX = [
    [1, 0, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0],
    [0, 1, 0, 0],
]
_CY = [
    [1, 0, 0, 0],
    [0, 0, 0, -1j],
    [0, 0, 1, 0],
    [0, 1j, 0, 0],
]
_CZ = [
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, -1],
]
_SWAP = [
    [1, 0, 0, 0],
    [0, 0, 1, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 1],
]
_DCX = [
    [1, 0, 0, 0],
    [0, 0, 0, 1],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
]
_ISWAP = [
    [1, 0, 0, 0],
    [0, 0, 1j, 0],
    [0, 1j, 0, 0],
    [0, 0, 0, 1],
]
_CS = [
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, 1j],
]
_CSDG = [
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, -1j],
]
_ECR = [
    [0, _SQ2, 0, 1j * _SQ2],
    [_SQ2, 0, -1j * _SQ2, 0],
    [0, 1j * _SQ2, 0, _SQ2],
    [-1j * _SQ2, 0, _SQ2, 0],
]
_CH = [
    [1, 0, 0, 0],
    [0, _SQ2, 0, _SQ2],
    [0, 0, 1, 0],
    [0, _SQ2, 0, -_SQ2],
]
_CSX = [
    [1, 0, 0, 0],
    [0, 0.5 + 0.5j, 0, 0.5 - 0.5j],
    [0, 0, 1, 0],
    [0, 0.5 - 0.5j, 0, 0.5 + 0.5j],
]

_DEFINITIONS: dict[str, GateDefinition] = {}


def _define(name: str, arity: int, num_params: int, fn) -> None:
    _DEFINITIONS[name] = GateDefinition(name, arity, num_params, fn)


for _name, _mat in [
    ("x", _X), ("y", _Y), ("z", _Z), ("h", _H), ("s", _S), ("t", _T),
    ("id", _ID), ("sxdg", _SXDG), ("sdg", _SDG), ("sx", _SX), ("tdg", _TDG),
]:
    _define(_name, 1, 0, _const(_mat))

for _name, _mat in [
    ("cx", _CX), ("cy", _CY), ("cz", _CZ), ("swap", _SWAP), ("dcx", _DCX),
    ("iswap", _ISWAP), ("csdg", _CSDG), ("ecr", _ECR), ("ch", _CH),
    ("cs", _CS), ("csx", _CSX),
]:
    _define(_name, 2, 0, _const(_mat))

_define("rz", 1, 1, _rz)


@dataclass(frozen=True)
class GateSet:
    """An ordered gate vocabulary; the order defines categorical indices."""

    id: str
    gates: tuple[GateDefinition, ...]

    def __len__(self) -> int:
        return len(self.gates)

    def __getitem__(self, index: int) -> GateDefinition:
        return self.gates[index]

    def index_of(self, name: str) -> int:
        for i, g in enumerate(self.gates):
            if g.name == name:
                return i
        raise KeyError(f"gate {name!r} not in gate set {self.id!r}")

    def names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.gates)


_CUSTOM22_ORDER = (
    "x", "y", "z", "h", "s", "t", "id", "sxdg", "sdg", "sx", "tdg",
    "cx", "cy", "cz", "swap", "dcx", "iswap", "csdg", "ecr", "ch", "cs", "csx",
)
_HERON_NP_ORDER = ("x", "sx", "id", "cz")
_HERON_P_ORDER = _HERON_NP_ORDER + ("rz",)

_GATE_SETS = {
    CUSTOM22: GateSet(CUSTOM22, tuple(_DEFINITIONS[n] for n in _CUSTOM22_ORDER)),
    HERON_NP: GateSet(HERON_NP, tuple(_DEFINITIONS[n] for n in _HERON_NP_ORDER)),
    HERON_P: GateSet(HERON_P, tuple(_DEFINITIONS[n] for n in _HERON_P_ORDER)),
}


def get_gate_set(gateset_id: str) -> GateSet:
    try:
        return _GATE_SETS[gateset_id.lower()]
    except KeyError:
        raise KeyError(
            f"unknown gate set {gateset_id!r}; expected one of {sorted(_GATE_SETS)}"
        ) from None


def gate_definition(name: str) -> GateDefinition:
    """Look up a gate definition by name, independent of gate set."""
    try:
        return _DEFINITIONS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown gate {name!r}") from None


def check_unitarity(atol: float = 1e-12) -> None:
    """Verify U @ U^dagger = I for every registered gate; raises on failure."""
    probe_params = [0.0, 0.7, -2.3, 5.9]
    for gate in _DEFINITIONS.values():
        thetas = [()] if gate.num_params == 0 else [(p,) for p in probe_params]
        for params in thetas:
            u = gate.unitary(params)
            eye = np.eye(u.shape[0])
            if not np.allclose(u @ u.conj().T, eye, atol=atol):
                raise AssertionError(f"gate {gate.name} is not unitary for params {params}")


check_unitarity()
