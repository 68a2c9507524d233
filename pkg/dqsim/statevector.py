"""
Dense statevector simulation over named registers.

Amplitudes are kept as a tensor with one axis of length 2 per qubit, in layout order, optionally
followed by batch axes. Every kernel acts on the leading qubit axes only, so a batch of basis
states propagates a whole operator through one circuit pass. Operations update the state in place
and return it.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from dqsim.errors import DomainError, PostSelectionError, ShapeError
from dqsim.pauli import OperatorSum, PauliString, dense_matrix
from dqsim.utils.caps import check_dense, check_qubits
from dqsim.utils.file import atomic_write

DUMP_MAGIC = b"DQSV"
DUMP_VERSION = 1
DUMP_HEADER = struct.Struct("<4sIII")

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
GATES = {
    "H": HADAMARD,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
}


class Register(NamedTuple):
    name: str
    width: int
    owner: Union[int, str, None]  # node index, "control", or None when spread over the partition


@dataclass(frozen=True)
class RegisterLayout:
    registers: Tuple[Register, ...]
    offsets: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offsets = {}
        position = 0
        for reg in self.registers:
            if reg.name in offsets:
                raise ShapeError(f"Duplicate register name '{reg.name}'")
            if reg.width < 1:
                raise ShapeError(f"Register '{reg.name}' must have width >= 1, got {reg.width}")
            offsets[reg.name] = position
            position += reg.width
        object.__setattr__(self, "offsets", offsets)
        check_qubits(position)

    @property
    def total_qubits(self) -> int:
        return sum(r.width for r in self.registers)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    def register(self, name: str) -> Register:
        for reg in self.registers:
            if reg.name == name:
                return reg
        raise ShapeError(f"Unknown register '{name}'")

    def qubits(self, name: str) -> Tuple[int, ...]:
        reg = self.register(name)
        start = self.offsets[name]
        return tuple(range(start, start + reg.width))

    def qubits_of(self, names: Iterable[str]) -> Tuple[int, ...]:
        return tuple(q for name in names for q in self.qubits(name))

    def extend(self, registers: Sequence[Register]) -> "RegisterLayout":
        return RegisterLayout(self.registers + tuple(registers))

    def without(self, names: Iterable[str]) -> "RegisterLayout":
        names = set(names)
        return RegisterLayout(tuple(r for r in self.registers if r.name not in names))


def layout(*registers: Tuple) -> RegisterLayout:
    """Shorthand: layout(("sys", 3, None), ("anc", 1, "control"))"""
    return RegisterLayout(tuple(Register(*r) for r in registers))


@dataclass
class StateVector:
    amplitudes: np.ndarray
    layout: RegisterLayout

    @property
    def total_qubits(self) -> int:
        return self.layout.total_qubits

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return self.amplitudes.shape[self.total_qubits :]

    @property
    def vector(self) -> np.ndarray:
        """Flat amplitudes (basis index along the first axis, batch along the second if present)"""
        if self.batch_shape:
            return self.amplitudes.reshape(2**self.total_qubits, -1)
        return self.amplitudes.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.layout)


def allocate(layout: RegisterLayout, batch: Optional[int] = None) -> StateVector:
    """All-zeros basis state, or `batch` copies of it along a trailing axis."""
    check_qubits(layout.total_qubits)
    shape = (2,) * layout.total_qubits + ((batch,) if batch else ())
    amplitudes = np.zeros(shape, dtype=complex)
    amplitudes[(0,) * layout.total_qubits] = 1.0
    return StateVector(amplitudes, layout)


def product_state(layout: RegisterLayout, register_states: Dict[str, np.ndarray]) -> StateVector:
    """Product of per-register vectors; registers not mentioned start in |0>."""
    check_qubits(layout.total_qubits)
    full = np.ones(1, dtype=complex)
    for reg in layout.registers:
        vector = np.asarray(register_states.get(reg.name, _basis(2**reg.width, 0)), dtype=complex)
        if vector.shape != (2**reg.width,):
            raise ShapeError(f"State for register '{reg.name}' has shape {vector.shape}, expected ({2**reg.width},)")
        full = np.kron(full, vector)
    return StateVector(full.reshape((2,) * layout.total_qubits), layout)


def basis_batch(layout: RegisterLayout, name: str) -> StateVector:
    """Batch whose column j holds basis state |j> on register `name` and |0> elsewhere"""
    qubits = layout.qubits(name)
    dim = 2 ** len(qubits)
    n = layout.total_qubits
    flat = np.zeros((2**n, dim), dtype=complex)
    after = n - qubits[-1] - 1
    # basis index of |0..0, j, 0..0>
    flat[np.arange(dim) << after, np.arange(dim)] = 1.0
    return StateVector(flat.reshape((2,) * n + (dim,)), layout)


def _basis(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def random_state(rng: np.random.Generator, qubits: int) -> np.ndarray:
    v = rng.normal(size=2**qubits) + 1j * rng.normal(size=2**qubits)
    return v / np.linalg.norm(v)


def _check_targets(state: StateVector, qubits: Iterable[int]):
    n = state.total_qubits
    for q in qubits:
        if not 0 <= q < n:
            raise ShapeError(f"Qubit {q} outside layout of {n} qubits")


def _fixed_index(fixed: Dict[int, int]) -> tuple:
    if not fixed:
        return ()
    index = [slice(None)] * (max(fixed) + 1)
    for q, v in fixed.items():
        index[q] = v
    return tuple(index)


def _shift(qubits: Iterable[int], fixed: Dict[int, int]) -> Tuple[int, ...]:
    """Axis positions inside a sub-tensor from which the `fixed` axes were indexed away"""
    return tuple(q - sum(1 for c in fixed if c < q) for q in qubits)


def _on_axes(psi: np.ndarray, qubits: Sequence[int], fn) -> np.ndarray:
    k = len(qubits)
    moved = np.moveaxis(psi, list(qubits), list(range(k)))
    shape = moved.shape
    result = fn(moved.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(result, list(range(k)), list(qubits))


def _pauli_tensor(psi: np.ndarray, axes: str, qubits: Sequence[int]) -> np.ndarray:
    out = psi
    for a, q in zip(axes, qubits):
        if a == "I":
            continue
        shape = [1] * out.ndim
        shape[q] = 2
        if a in "XY":
            out = np.flip(out, axis=q)
        if a == "Z":
            out = out * np.array([1, -1], dtype=complex).reshape(shape)
        elif a == "Y":
            out = out * np.array([-1j, 1j]).reshape(shape)
    return out


def _controlled_update(state: StateVector, controls: Optional[Dict[int, int]], update) -> StateVector:
    """Apply update(sub_tensor, axis_shift) to the block where every control qubit holds its value"""
    controls = controls or {}
    _check_targets(state, controls)
    index = _fixed_index(controls)
    sub = state.amplitudes[index]
    state.amplitudes[index] = update(sub, lambda qubits: _shift(qubits, controls))
    return state


def apply_matrix(
    state: StateVector, matrix: np.ndarray, qubits: Sequence[int], controls: Optional[Dict[int, int]] = None
) -> StateVector:
    qubits = tuple(qubits)
    _check_targets(state, qubits)
    if matrix.shape != (2 ** len(qubits),) * 2:
        raise ShapeError(f"Matrix of shape {matrix.shape} does not act on {len(qubits)} qubits")
    return _controlled_update(state, controls, lambda sub, shift: _on_axes(sub, shift(qubits), lambda m: matrix @ m))


def apply_pauli(
    state: StateVector,
    axes: str,
    qubits: Sequence[int],
    controls: Optional[Dict[int, int]] = None,
    phase: complex = 1.0,
) -> StateVector:
    """Multiply by phase * P on the given qubits, optionally conditioned on control values"""
    _check_targets(state, qubits)
    return _controlled_update(state, controls, lambda sub, shift: phase * _pauli_tensor(sub, axes, shift(qubits)))


def apply_phase(state: StateVector, phase: complex, controls: Dict[int, int]) -> StateVector:
    return _controlled_update(state, controls, lambda sub, shift: phase * sub)


def cnot(state: StateVector, control: int, target: int) -> StateVector:
    return apply_pauli(state, "X", (target,), {control: 1})


def hadamard(state: StateVector, qubits: Iterable[int]) -> StateVector:
    for q in qubits:
        apply_matrix(state, HADAMARD, (q,))
    return state


@dataclass(frozen=True)
class StatePrep:
    """
    Unitary taking |0> to `amplitudes`, realised as the Householder reflection about |0> - a.
    It is its own inverse.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        dim = a.shape[0]
        if a.ndim != 1 or dim & (dim - 1) or dim < 2:
            raise ShapeError(f"State preparation needs a vector of length 2^w >= 2, got shape {a.shape}")
        if abs(np.linalg.norm(a) - 1.0) > 1e-10:
            raise DomainError(f"State preparation amplitudes have norm {np.linalg.norm(a):.12f}, expected 1")
        if abs(a[0].imag) > 1e-12:
            raise DomainError("State preparation needs a real amplitude on |0>")
        object.__setattr__(self, "amplitudes", a)

    @property
    def width(self) -> int:
        return int(self.amplitudes.shape[0]).bit_length() - 1

    def matrix(self) -> np.ndarray:
        v = _basis(self.amplitudes.shape[0], 0) - self.amplitudes
        norm2 = np.vdot(v, v).real
        if norm2 < 1e-30:
            return np.eye(len(v), dtype=complex)
        return np.eye(len(v), dtype=complex) - 2 * np.outer(v, v.conj()) / norm2

    def apply(self, state: StateVector, qubits: Sequence[int], controls: Optional[Dict[int, int]] = None):
        v = _basis(self.amplitudes.shape[0], 0) - self.amplitudes
        norm2 = np.vdot(v, v).real
        if norm2 < 1e-30:
            return state
        if len(qubits) != self.width:
            raise ShapeError(f"State preparation of width {self.width} applied to {len(qubits)} qubits")

        def reflect(m: np.ndarray) -> np.ndarray:
            return m - np.outer(v, (2 / norm2) * (v.conj() @ m))

        return _controlled_update(state, controls, lambda sub, shift: _on_axes(sub, shift(qubits), reflect))


@dataclass(frozen=True)
class UnitarySpec:
    kind: str  # "gate", "pauli_rotation" or "matrix"
    targets: Tuple[int, ...]
    name: str = ""
    matrix: Optional[np.ndarray] = None
    pauli: str = ""
    angle: float = 0.0

    def __post_init__(self):
        if self.kind == "matrix":
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (2 ** len(self.targets),) * 2:
                raise ShapeError(f"Matrix of shape {m.shape} does not fit {len(self.targets)} targets")
            if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-10):
                raise DomainError("Explicit gate matrix is not unitary")
        elif self.kind == "pauli_rotation" and len(self.pauli) != len(self.targets):
            raise ShapeError(f"Pauli '{self.pauli}' does not match {len(self.targets)} targets")
        elif self.kind == "gate" and self.name not in (*GATES, "CNOT", "MCX", "PHASE"):
            raise DomainError(f"Unknown gate '{self.name}'")


def gate(name: str, *targets: int, angle: float = 0.0) -> UnitarySpec:
    """Named gate. CNOT and MCX take controls first and the target last; PHASE is diag(1, e^{i angle})."""
    return UnitarySpec("gate", tuple(targets), name=name, angle=angle)


def pauli_rotation(pauli: str, angle: float, targets: Optional[Sequence[int]] = None) -> UnitarySpec:
    """exp(-i angle P)"""
    return UnitarySpec("pauli_rotation", tuple(targets or range(len(pauli))), pauli=pauli, angle=angle)


def matrix_gate(matrix: np.ndarray, *targets: int) -> UnitarySpec:
    return UnitarySpec("matrix", tuple(targets), matrix=np.asarray(matrix, dtype=complex))


def apply_unitary(state: StateVector, u: UnitarySpec) -> StateVector:
    _check_targets(state, u.targets)
    if u.kind == "matrix":
        return apply_matrix(state, u.matrix, u.targets)
    if u.kind == "pauli_rotation":
        return apply_pauli_exponential(state, 1.0, PauliString(u.pauli), u.angle, u.targets)
    if u.name in GATES:
        return apply_matrix(state, GATES[u.name], u.targets)
    if u.name in ("CNOT", "MCX"):
        *controls, target = u.targets
        return apply_pauli(state, "X", (target,), {c: 1 for c in controls})
    # PHASE
    return apply_phase(state, np.exp(1j * u.angle), {u.targets[0]: 1})


def apply_pauli_exponential(
    state: StateVector,
    coeff: float,
    string: PauliString,
    angle: float,
    qubits: Optional[Sequence[int]] = None,
    controls: Optional[Dict[int, int]] = None,
) -> StateVector:
    """exp(-i angle coeff P) = cos(theta) - i sin(theta) P with theta = angle * coeff"""
    qubits = tuple(qubits if qubits is not None else range(string.qubit_count))
    _check_targets(state, qubits)
    theta = angle * coeff
    c, s = np.cos(theta), np.sin(theta)

    def rotate(sub: np.ndarray, shift) -> np.ndarray:
        return c * sub - 1j * s * _pauli_tensor(sub, string.axes, shift(qubits))

    return _controlled_update(state, controls, rotate)


def _register_index(state: StateVector, values: Dict[str, int]) -> tuple:
    fixed = {}
    for name, value in values.items():
        qubits = state.layout.qubits(name)
        if not 0 <= value < 2 ** len(qubits):
            raise ShapeError(f"Value {value} does not fit register '{name}' of width {len(qubits)}")
        for i, q in enumerate(qubits):
            fixed[q] = (value >> (len(qubits) - 1 - i)) & 1
    return _fixed_index(fixed)


def project(state: StateVector, values: Dict[str, int]) -> StateVector:
    """Unnormalized projection onto the given register values (registers kept in the layout)."""
    index = _register_index(state, values)
    projected = np.zeros_like(state.amplitudes)
    projected[index] = state.amplitudes[index]
    return StateVector(projected, state.layout)


def post_select(state: StateVector, register: str, value: int) -> Tuple[StateVector, float]:
    """Renormalized conditional state and Born probability of reading `value` on `register`"""
    total = state.norm() ** 2
    projected = project(state, {register: value})
    probability = projected.norm() ** 2 / total
    if probability < 1e-14:
        raise PostSelectionError(f"Register '{register}' has probability {probability:.3e} of reading {value}")
    projected.amplitudes /= np.sqrt(probability * total)
    return projected, float(probability)


def extend(state: StateVector, registers: Sequence[Register]) -> StateVector:
    """Append fresh registers in |0>"""
    new_layout = state.layout.extend(registers)
    n = state.total_qubits
    k = new_layout.total_qubits - n
    amplitudes = np.zeros((2,) * n + (2,) * k + state.batch_shape, dtype=complex)
    amplitudes[(slice(None),) * n + (0,) * k] = state.amplitudes
    return StateVector(amplitudes, new_layout)


def discard(state: StateVector, names: Sequence[str], values: Optional[Dict[str, int]] = None) -> StateVector:
    """Drop registers after projecting them onto `values` (default 0); the result is not renormalized."""
    values = values or {}
    index = _register_index(state, {name: values.get(name, 0) for name in names})
    # integer indices drop exactly the discarded axes
    amplitudes = state.amplitudes[index]
    return StateVector(np.ascontiguousarray(amplitudes), state.layout.without(names))


def register_probabilities(state: StateVector, register: str) -> np.ndarray:
    """Marginal distribution of one register"""
    qubits = state.layout.qubits(register)
    probs = np.abs(state.amplitudes) ** 2
    others = tuple(ax for ax in range(probs.ndim) if ax not in qubits)
    marginal = probs.sum(axis=others).reshape(-1)
    return marginal / marginal.sum()


def as_operator(state: StateVector) -> np.ndarray:
    """Matrix whose columns are the batch entries"""
    if not state.batch_shape:
        raise ShapeError("State carries no batch axis")
    return state.amplitudes.reshape(2**state.total_qubits, -1)


def exact_evolution(h: Union[OperatorSum, np.ndarray], t: float) -> np.ndarray:
    """exp(-iHt) of a Hermitian operator via eigendecomposition"""
    if isinstance(h, OperatorSum):
        matrix = dense_matrix(h)
    else:
        matrix = np.asarray(h, dtype=complex)
        check_dense(int(np.log2(matrix.shape[0])), "exact evolution")
    eigenvalues, vectors = scipy.linalg.eigh(matrix)
    return (vectors * np.exp(-1j * eigenvalues * t)) @ vectors.conj().T


def operator_distance(u: np.ndarray, v: np.ndarray) -> float:
    if u.shape != v.shape:
        raise ShapeError(f"Operator shapes differ: {u.shape} vs {v.shape}")
    return float(np.linalg.norm(u - v, 2))


def state_distance(u: np.ndarray, v: np.ndarray) -> float:
    if u.shape != v.shape:
        raise ShapeError(f"State shapes differ: {u.shape} vs {v.shape}")
    return float(np.linalg.norm(u - v))


def dump_state(state: StateVector, filename: str):
    """Write amplitudes as little-endian (re, im) float64 pairs after a 16-byte DQSV header."""
    if state.batch_shape:
        raise ShapeError("Batched states cannot be dumped")
    header = DUMP_HEADER.pack(DUMP_MAGIC, DUMP_VERSION, state.total_qubits, 0)
    atomic_write(filename, header + state.vector.astype("<c16").tobytes())
    logging.info(f"State of {state.total_qubits} qubits dumped to {filename}")


def load_state(filename: str, layout: Optional[RegisterLayout] = None) -> StateVector:
    with open(filename, "rb") as f:
        data = f.read()
    if len(data) < DUMP_HEADER.size:
        raise ShapeError(f"{filename} is too short for a state dump")
    magic, version, qubits, _ = DUMP_HEADER.unpack_from(data)
    if magic != DUMP_MAGIC or version != DUMP_VERSION:
        raise ShapeError(f"{filename} is not a version {DUMP_VERSION} DQSV dump")
    amplitudes = np.frombuffer(data, dtype="<c16", offset=DUMP_HEADER.size)
    if amplitudes.shape[0] != 2**qubits:
        raise ShapeError(f"{filename} holds {amplitudes.shape[0]} amplitudes, header says {qubits} qubits")
    if layout is None:
        layout = RegisterLayout((Register("q", qubits, None),))
    elif layout.total_qubits != qubits:
        raise ShapeError(f"Layout has {layout.total_qubits} qubits, dump has {qubits}")
    return StateVector(amplitudes.astype(complex).reshape((2,) * qubits), layout)


def embed_operator(matrix: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Dense 2^n operator acting as `matrix` on `qubits` and as identity elsewhere"""
    check_dense(n, "embedded operator")
    state = basis_batch(layout(("q", n, None)), "q")
    apply_matrix(state, matrix, qubits)
    return as_operator(state)


def identity_batch(layout: RegisterLayout) -> StateVector:
    """Batch of every basis state of the layout, so a circuit pass yields the full operator"""
    n = layout.total_qubits
    check_dense(n, "operator batch")
    return StateVector(np.eye(2**n, dtype=complex).reshape((2,) * n + (2**n,)), layout)
