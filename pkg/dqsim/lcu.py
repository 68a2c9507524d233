"""
Distributed linear combination of unitaries.

Covers the distributed block encoding (control-node prepare, node-local select), distributed
reflections in direct and strict modes, the d-LCU walk W and oblivious amplitude amplification.
Every ancilla that has to be shared by the nodes is a repetition-encoded register: one copy per
node, filled by the relay in dqsim.qnet.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from dqsim.errors import DomainError, ModeError, PostSelectionError, ShapeError, TopologyError
from dqsim.pauli import SINGLE_QUBIT, ClusteredHamiltonian, QubitPartition
from dqsim.qnet import CommLedger, NetworkTopology, apply_collection, apply_distribution, charge_fanout
from dqsim.statevector import (
    Register,
    RegisterLayout,
    StatePrep,
    StateVector,
    apply_matrix,
    apply_pauli,
    apply_phase,
    as_operator,
    basis_batch,
    discard,
    embed_operator,
    extend,
    hadamard,
    product_state,
    project,
)
from dqsim.utils.caps import operator_amplitudes

SYSTEM = "sys"
DIRECT = "direct"
STRICT = "distributed-strict"
RO_MODES = (DIRECT, STRICT)


def ceil_log2(count: int) -> int:
    return max(0, (int(count) - 1).bit_length())


def register_width(count: int) -> int:
    """Qubits needed to index `count` values, at least one"""
    return max(1, ceil_log2(count))


def value_controls(layout: RegisterLayout, names: Sequence[str], value: int) -> Dict[int, int]:
    """Control dict fixing the concatenation of `names` (most significant first) to `value`"""
    qubits = layout.qubits_of(names)
    if not 0 <= value < 2 ** len(qubits):
        raise ShapeError(f"Value {value} does not fit registers {list(names)} of {len(qubits)} qubits")
    return {q: (value >> (len(qubits) - 1 - i)) & 1 for i, q in enumerate(qubits)}


def _check_network(partition: QubitPartition, topology: NetworkTopology):
    if partition.gamma != topology.gamma:
        raise TopologyError(f"Partition has {partition.gamma} nodes but the network has {topology.gamma}")


@dataclass(frozen=True)
class LcuDecomposition:
    """V = sum_j beta_j (x)_gamma U_j^(gamma); factors[j][gamma - 1] acts on the qubits of node gamma"""

    coefficients: Tuple[float, ...]
    factors: Tuple[Tuple[np.ndarray, ...], ...]
    partition: QubitPartition

    def __post_init__(self):
        if not self.coefficients or len(self.coefficients) != len(self.factors):
            raise ShapeError(f"{len(self.coefficients)} coefficients for {len(self.factors)} factor tuples")
        if min(self.coefficients) <= 0:
            raise DomainError(f"LCU coefficients must be positive, got {self.coefficients}")
        for j, factors in enumerate(self.factors):
            if len(factors) != self.partition.gamma:
                raise ShapeError(f"Term {j} has {len(factors)} factors for {self.partition.gamma} nodes")
            for g, u in enumerate(factors, start=1):
                dim = 2 ** len(self.partition.qubits(g))
                if u.shape != (dim, dim):
                    raise ShapeError(f"Factor of term {j} on node {g} has shape {u.shape}, expected {(dim, dim)}")
                if not np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-10):
                    raise DomainError(f"Factor of term {j} on node {g} is not unitary")

    @property
    def s(self) -> float:
        return float(sum(self.coefficients))

    @property
    def size(self) -> int:
        return len(self.coefficients)

    @property
    def width(self) -> int:
        return register_width(self.size)

    def matrix(self) -> np.ndarray:
        n = self.partition.qubit_count
        total = np.zeros((2**n, 2**n), dtype=complex)
        for beta, factors in zip(self.coefficients, self.factors):
            term = np.eye(2**n, dtype=complex)
            for g, u in enumerate(factors, start=1):
                term = embed_operator(u, self.partition.qubits(g), n) @ term
            total += beta * term
        return total


def balance_to_s2(
    node_unitaries: Sequence[np.ndarray], partition: QubitPartition, pauli: str = "Z"
) -> LcuDecomposition:
    """
    Exact s = 2 decomposition of a product unitary V: V = V e^{i pi Q/3} + V e^{-i pi Q/3} with Q a
    Pauli on the first qubit of node 1. pauli="I" gives the degenerate split into two phased copies of V.
    """
    first = node_unitaries[0]
    q = np.kron(SINGLE_QUBIT[pauli], np.eye(first.shape[0] // 2))
    plus = math.cos(math.pi / 3) * np.eye(first.shape[0]) + 1j * math.sin(math.pi / 3) * q
    minus = math.cos(math.pi / 3) * np.eye(first.shape[0]) - 1j * math.sin(math.pi / 3) * q
    rest = tuple(np.asarray(u, dtype=complex) for u in node_unitaries[1:])
    factors = ((first @ plus,) + rest, (first @ minus,) + rest)
    return LcuDecomposition((1.0, 1.0), factors, partition)


def lcu_registers(decomp: LcuDecomposition) -> Tuple[Register, ...]:
    return tuple(Register(f"L{g}", decomp.width, g) for g in range(1, decomp.partition.gamma + 1))


def lcu_prep(decomp: LcuDecomposition) -> StatePrep:
    amplitudes = np.zeros(2**decomp.width, dtype=complex)
    amplitudes[: decomp.size] = np.sqrt(np.array(decomp.coefficients) / decomp.s)
    return StatePrep(amplitudes)


def lcu_select(
    state: StateVector, decomp: LcuDecomposition, adjoint: bool = False, controls: Optional[Dict[int, int]] = None
) -> StateVector:
    """Each node applies U_j^(gamma) conditioned on its own copy reading j"""
    for g in range(1, decomp.partition.gamma + 1):
        qubits = decomp.partition.qubits(g)
        for j, factors in enumerate(decomp.factors):
            u = factors[g - 1].conj().T if adjoint else factors[g - 1]
            apply_matrix(state, u, qubits, {**(controls or {}), **value_controls(state.layout, [f"L{g}"], j)})
    return state


def lcu_apply_W(
    decomp: LcuDecomposition,
    state: StateVector,
    ledger: CommLedger,
    adjoint: bool = False,
    controls: Optional[Dict[int, int]] = None,
) -> Tuple[StateVector, float]:
    """
    W = (G^dagger (x) I) select (G (x) I). Returns the state and the amplitude left on the all-zero
    ancilla, which is 1/s when V is unitary.
    """
    _check_network(decomp.partition, ledger.topology)
    registers = {g: f"L{g}" for g in range(1, decomp.partition.gamma + 1)}
    prep = lcu_prep(decomp)
    norm_in = state.norm()
    apply_distribution(state, prep, registers, ledger.topology, ledger, "distribute-LCU", controls)
    lcu_select(state, decomp, adjoint, controls)
    apply_collection(state, prep, registers, ledger.topology, ledger, "return", controls)
    good = project(state, {name: 0 for name in registers.values()}).norm()
    return state, good / norm_in


def reflect_ancillas(
    state: StateVector, names: Sequence[str], ledger: CommLedger, controls: Optional[Dict[int, int]] = None
) -> StateVector:
    """R = I - 2|0..0><0..0| on the named registers, charged as one distributed reflection"""
    apply_phase(state, -1.0, {**(controls or {}), **value_controls(state.layout, names, 0)})
    charge_fanout(ledger.topology, ledger, 1, "reflection")
    return state


def oaa_s2(
    decomp: LcuDecomposition, state: StateVector, ledger: CommLedger, controls: Optional[Dict[int, int]] = None
) -> StateVector:
    """-W R W^dagger R W, which maps |0>|psi> to |0> V|psi> exactly when s = 2"""
    if abs(decomp.s - 2.0) > 1e-12:
        raise ModeError(f"Oblivious amplitude amplification needs s = 2, got s = {decomp.s:.12g}; use post-selection")
    names = [r.name for r in lcu_registers(decomp)]
    lcu_apply_W(decomp, state, ledger, controls=controls)
    reflect_ancillas(state, names, ledger, controls)
    lcu_apply_W(decomp, state, ledger, adjoint=True, controls=controls)
    reflect_ancillas(state, names, ledger, controls)
    lcu_apply_W(decomp, state, ledger, controls=controls)
    return apply_phase(state, -1.0, controls or {})


def lcu_apply(decomp: LcuDecomposition, state: StateVector, ledger: CommLedger) -> Tuple[StateVector, float]:
    """
    Apply V to a state without LCU ancillas. Amplified deterministically when s = 2, otherwise
    post-selected on the all-zero ancilla; returns the renormalized state and success probability.
    """
    registers = lcu_registers(decomp)
    names = [r.name for r in registers]
    work = extend(state, registers)
    if abs(decomp.s - 2.0) <= 1e-12:
        oaa_s2(decomp, work, ledger)
    else:
        lcu_apply_W(decomp, work, ledger)
    total = work.norm() ** 2
    reduced = discard(work, names)
    probability = reduced.norm() ** 2 / total
    if probability < 1e-14:
        raise PostSelectionError(f"LCU post-selection probability {probability:.3e}")
    reduced.amplitudes /= math.sqrt(probability)
    logging.debug(f"LCU with s={decomp.s:.6g} applied, success probability {probability:.6f}")
    return reduced, float(probability)


# distributed block encoding


@dataclass(frozen=True)
class BlockEncoding:
    ch: ClusteredHamiltonian
    control_prep: StatePrep
    local_preps: Dict[int, StatePrep]
    alpha: float
    suffix: str = ""

    @property
    def gamma(self) -> int:
        return self.ch.gamma

    @property
    def width(self) -> int:
        return self.control_prep.width

    @property
    def control_registers(self) -> Dict[int, str]:
        return {g: self.control_name(g) for g in range(1, self.gamma + 1)}

    def control_name(self, gamma: int) -> str:
        return f"C{gamma}{self.suffix}"

    def local_name(self, gamma: int) -> str:
        return f"A{gamma}{self.suffix}"

    def registers(self) -> Tuple[Register, ...]:
        copies = tuple(Register(self.control_name(g), self.width, g) for g in range(1, self.gamma + 1))
        local = tuple(Register(self.local_name(g), self.local_preps[g].width, g) for g in range(1, self.gamma + 1))
        return copies + local

    @property
    def ancilla_names(self) -> Tuple[str, ...]:
        return tuple(r.name for r in self.registers())

    @property
    def ancilla_qubits(self) -> int:
        return sum(r.width for r in self.registers())

    def layout(self) -> RegisterLayout:
        return RegisterLayout((Register(SYSTEM, self.ch.qubit_count, None),) + self.registers())


def prepare_control(ch: ClusteredHamiltonian) -> StatePrep:
    """G_C: amplitude sqrt(|H_gamma|_1 / alpha) on value gamma - 1 and sqrt(|H_e| / alpha) on value gamma + e"""
    alpha = ch.alpha
    if alpha <= 0:
        raise DomainError("Block encoding needs alpha > 0, the Hamiltonian is zero")
    amplitudes = np.zeros(2 ** register_width(ch.num_edges + ch.gamma), dtype=complex)
    for g in range(1, ch.gamma + 1):
        amplitudes[g - 1] = math.sqrt(ch.local_norm(g) / alpha)
    for e, term in enumerate(ch.interactions):
        amplitudes[ch.gamma + e] = math.sqrt(term.norm / alpha)
    return StatePrep(amplitudes)


def prepare_local(ch: ClusteredHamiltonian, gamma: int) -> StatePrep:
    terms = ch.locals[gamma].terms
    amplitudes = np.zeros(2 ** register_width(len(terms)), dtype=complex)
    if not terms:
        amplitudes[0] = 1.0
        return StatePrep(amplitudes)
    norm = ch.local_norm(gamma)
    for index, (coeff, _) in enumerate(terms):
        amplitudes[index] = math.sqrt(abs(coeff) / norm)
    return StatePrep(amplitudes)


def block_encoding(ch: ClusteredHamiltonian, suffix: str = "") -> BlockEncoding:
    locals_ = {g: prepare_local(ch, g) for g in range(1, ch.gamma + 1)}
    return BlockEncoding(ch, prepare_control(ch), locals_, ch.alpha, suffix)


def apply_select(state: StateVector, be: BlockEncoding, controls: Optional[Dict[int, int]] = None) -> StateVector:
    """
    Node-local select: node gamma reads its own control copy. Its own index triggers the local select
    over A_gamma; an interaction index triggers the node's Pauli factor of that term. Coefficient signs
    are applied by the lowest-index support node.
    """
    ch = be.ch
    base = dict(controls or {})
    for g in range(1, ch.gamma + 1):
        qubits = ch.partition.qubits(g)
        local = {**base, **value_controls(state.layout, [be.control_name(g)], g - 1)}
        for index, (coeff, string) in enumerate(ch.locals[g].terms):
            condition = {**local, **value_controls(state.layout, [be.local_name(g)], index)}
            apply_pauli(state, string.restrict(qubits), qubits, condition, phase=float(np.sign(coeff)))
        for e, term in enumerate(ch.interactions):
            if g not in term.support_nodes:
                continue
            sign = float(np.sign(term.coeff)) if g == term.support_nodes[0] else 1.0
            condition = {**base, **value_controls(state.layout, [be.control_name(g)], ch.gamma + e)}
            apply_pauli(state, term.string.restrict(qubits), qubits, condition, phase=sign)
    return state


def apply_local_preps(state: StateVector, be: BlockEncoding, controls: Optional[Dict[int, int]] = None):
    for g, prep in be.local_preps.items():
        prep.apply(state, state.layout.qubits(be.local_name(g)), controls)
    return state


def apply_dbe(
    state: StateVector, be: BlockEncoding, ledger: CommLedger, controls: Optional[Dict[int, int]] = None
) -> StateVector:
    """U_BE = G^dagger select G; Hermitian, so it is also its own inverse"""
    _check_network(be.ch.partition, ledger.topology)
    network = ledger.topology
    apply_distribution(state, be.control_prep, be.control_registers, network, ledger, "distribute-G_C", controls)
    apply_local_preps(state, be, controls)
    apply_select(state, be, controls)
    apply_local_preps(state, be, controls)
    apply_collection(state, be.control_prep, be.control_registers, network, ledger, "return", controls)
    return state


def dbe_block(
    ch: ClusteredHamiltonian, network: NetworkTopology, ledger: CommLedger
) -> Tuple[np.ndarray, CommLedger]:
    """
    Extract <0|G^dagger select G|0>, which equals H/alpha. The ledger is charged for one invocation;
    when the basis batch does not fit the amplitude budget the columns are computed one at a time
    and only the first column is charged.
    """
    be = block_encoding(ch)
    lay = be.layout()
    dim = 2**ch.qubit_count
    if 2**lay.total_qubits * dim <= operator_amplitudes():
        state = basis_batch(lay, SYSTEM)
        apply_dbe(state, be, ledger)
        block = as_operator(discard(state, be.ancilla_names))
    else:
        columns = []
        for j in range(dim):
            column = np.zeros(dim, dtype=complex)
            column[j] = 1.0
            state = product_state(lay, {SYSTEM: column})
            apply_dbe(state, be, ledger if j == 0 else CommLedger(network))
            columns.append(discard(state, be.ancilla_names).vector)
        block = np.stack(columns, axis=1)
    logging.debug(f"d-BE block extracted for {ch.qubit_count} qubits, alpha={be.alpha:.6g}")
    return block, ledger


# distributed reflection


@dataclass(frozen=True)
class ReflectionSpec:
    """R = I - (1 - e^{-i phi}) |value><value| on the concatenated target registers"""

    phi: float
    targets: Tuple[str, ...]
    mode: str = DIRECT
    value: int = 0

    def __post_init__(self):
        if not -1e-12 <= self.phi <= math.pi / 2 + 1e-12:
            raise DomainError(f"Reflection phase must lie in [0, pi/2], got {self.phi}")
        if self.mode not in RO_MODES:
            raise DomainError(f"Unknown reflection mode '{self.mode}', use one of {RO_MODES}")
        if not self.targets:
            raise ShapeError("Reflection needs at least one target register")


def dro_apply(
    spec: ReflectionSpec,
    state: StateVector,
    network: NetworkTopology,
    ledger: CommLedger,
    controls: Optional[Dict[int, int]] = None,
) -> Tuple[StateVector, float]:
    """Distributed reflection; returns the state and the post-selection success probability"""
    if spec.mode == DIRECT:
        condition = {**(controls or {}), **value_controls(state.layout, spec.targets, spec.value)}
        apply_phase(state, np.exp(-1j * spec.phi), condition)
        charge_fanout(network, ledger, 1, "d-RO")
        return state, 1.0
    if controls:
        raise ModeError("Strict reflections cannot be controlled, use direct mode")
    return _dro_strict(spec, state, network, ledger)


def _dro_strict(
    spec: ReflectionSpec, state: StateVector, network: NetworkTopology, ledger: CommLedger
) -> Tuple[StateVector, float]:
    """
    Nested LCU: C_b in (|0> + sqrt(2 sin(phi/2))|1>)/sqrt(N), one gamma_b per owner group in |+>,
    U_phi on C_b, then R_gamma = 2|v_gamma><v_gamma| - I on every group whose gamma_b is set.
    Post-selecting all of them on 0 leaves R/N.
    """
    groups: Dict[object, list] = {}
    for name in spec.targets:
        owner = state.layout.register(name).owner
        groups.setdefault(owner if owner is not None else f"register:{name}", []).append(name)
    extra = [Register("Cb", 1, "control")] + [
        Register(f"gb{i}", 1, owner if isinstance(owner, int) else "control") for i, owner in enumerate(groups)
    ]
    work = extend(state, extra)
    norm_factor = 1 + 2 * math.sin(spec.phi / 2)
    branch = StatePrep(np.array([1.0, math.sqrt(2 * math.sin(spec.phi / 2))]) / math.sqrt(norm_factor))
    cb = work.layout.qubits("Cb")
    flags = [work.layout.qubits(f"gb{i}")[0] for i in range(len(groups))]
    target_bits = value_controls(work.layout, spec.targets, spec.value)

    branch.apply(work, cb)
    hadamard(work, flags)
    apply_phase(work, np.exp(1j * (-spec.phi / 2 + 3 * math.pi / 2)), {cb[0]: 1})
    for flag, names in zip(flags, groups.values()):
        condition = {cb[0]: 1, flag: 1}
        group_bits = {q: target_bits[q] for q in work.layout.qubits_of(names)}
        apply_phase(work, -1.0, condition)
        apply_phase(work, -1.0, {**condition, **group_bits})
    hadamard(work, flags)
    branch.apply(work, cb)

    total = work.norm() ** 2
    reduced = discard(work, [r.name for r in extra])
    probability = reduced.norm() ** 2 / total
    if probability < 1e-14:
        raise PostSelectionError(f"Reflection post-selection probability {probability:.3e}")
    reduced.amplitudes /= math.sqrt(probability)
    charge_fanout(network, ledger, 1, "d-RO")
    return reduced, float(probability)
