"""Distributed phase estimation and Grover search on top of d-LCU and d-RO."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from dqsim.errors import CapabilityError, DomainError, ModeError
from dqsim.lcu import DIRECT, LcuDecomposition, ReflectionSpec, dro_apply, lcu_registers, oaa_s2
from dqsim.pauli import contiguous_partition
from dqsim.qnet import CommLedger, CommReport, NetworkTopology, charge_fanout, ledger_report, star
from dqsim.results import SYSTEM
from dqsim.statevector import (
    Register,
    RegisterLayout,
    apply_matrix,
    apply_phase,
    discard,
    extend,
    hadamard,
    product_state,
    register_probabilities,
)

PHASE = "phase"
GROVER_QUBIT_CAP = 16


@dataclass
class PhaseEstimate:
    bits: int
    distribution: np.ndarray
    top: int
    probability: float
    report: CommReport
    bound: float
    eigenvalue: complex = 1.0

    @property
    def top_bits(self) -> str:
        return format(self.top, f"0{self.bits}b")

    @property
    def phase(self) -> float:
        """Top outcome as a fraction of a full turn"""
        return self.top / 2**self.bits


def inverse_qft(bits: int) -> np.ndarray:
    size = 2**bits
    j = np.arange(size)
    return np.exp(-2j * np.pi * np.outer(j, j) / size) / math.sqrt(size)


def qpe_distribution(theta: float, bits: int) -> np.ndarray:
    """Exact outcome distribution for eigenphase 2 pi theta"""
    size = 2**bits
    x = np.arange(size)
    amplitudes = np.array([np.sum(np.exp(2j * np.pi * x * (theta - y / size))) / size for y in range(size)])
    return np.abs(amplitudes) ** 2


def qpe_bound(decomp: LcuDecomposition, bits: int) -> float:
    """Worst-case communication bound 2^{2K} sqrt(sum beta) Gamma log J"""
    return 2 ** (2 * bits) * math.sqrt(decomp.s) * decomp.partition.gamma * max(1.0, math.log2(decomp.size))


def run_dqpe(
    decomp: LcuDecomposition,
    eigenstate: np.ndarray,
    bits: int,
    network: Optional[NetworkTopology] = None,
) -> PhaseEstimate:
    """
    Phase estimation of V = sum beta_j U_j with a `bits`-qubit phase register on the control node.
    Phase qubit k drives 2^(bits-1-k) controlled calls of the amplified d-LCU, each also paying a
    fan-out of the control qubit.
    """
    if bits < 1:
        raise DomainError(f"Phase estimation needs at least one bit, got {bits}")
    if abs(decomp.s - 2.0) > 1e-12:
        raise ModeError(f"Controlled d-LCU calls need s = 2, got s = {decomp.s:.12g}; rebalance with balance_to_s2")
    network = network or star(decomp.partition.gamma)
    ledger = CommLedger(network)
    n = decomp.partition.qubit_count
    vector = np.asarray(eigenstate, dtype=complex)
    vector = vector / np.linalg.norm(vector)

    matrix = decomp.matrix()
    eigenvalue = complex(np.vdot(vector, matrix @ vector))
    if np.linalg.norm(matrix @ vector - eigenvalue * vector) > 1e-8:
        logging.warning("QPE input is not an eigenstate, the outcome distribution is a mixture")

    lay = RegisterLayout((Register(SYSTEM, n, None), Register(PHASE, bits, "control")))
    state = extend(product_state(lay, {SYSTEM: vector}), lcu_registers(decomp))
    phase_qubits = state.layout.qubits(PHASE)
    hadamard(state, phase_qubits)
    for k, q in enumerate(phase_qubits):
        for _ in range(2 ** (bits - 1 - k)):
            charge_fanout(network, ledger, 1, "control fan-out")
            oaa_s2(decomp, state, ledger, {q: 1})
        logging.debug(f"Phase qubit {k} done, {ledger.qubits_teleported} qubits teleported so far")
    apply_matrix(state, inverse_qft(bits), phase_qubits)
    state = discard(state, [r.name for r in lcu_registers(decomp)])

    distribution = register_probabilities(state, PHASE)
    top = int(np.argmax(distribution))
    estimate = PhaseEstimate(
        bits=bits,
        distribution=distribution,
        top=top,
        probability=float(distribution[top]),
        report=ledger_report(ledger),
        bound=qpe_bound(decomp, bits),
        eigenvalue=eigenvalue,
    )
    logging.info(
        f"d-QPE: outcome {estimate.top_bits} with probability {estimate.probability:.6f}, "
        f"{estimate.report.qubits_teleported} qubits teleported (bound {estimate.bound:.6g})"
    )
    return estimate


@dataclass(frozen=True)
class GroverInstance:
    gamma: int
    qubits_per_node: int
    marked: int
    iterations: Optional[int] = None

    def __post_init__(self):
        if self.gamma < 1 or self.qubits_per_node < 1:
            raise DomainError(f"Grover instance needs gamma >= 1 and n >= 1, got {self.gamma}, {self.qubits_per_node}")
        if self.gamma * self.qubits_per_node > GROVER_QUBIT_CAP:
            qubits = self.gamma * self.qubits_per_node
            raise CapabilityError(f"Grover search over {qubits} qubits exceeds {GROVER_QUBIT_CAP}")
        if not 0 <= self.marked < self.size:
            raise DomainError(f"Marked item {self.marked} outside 0..{self.size - 1}")

    @property
    def size(self) -> int:
        return 2 ** (self.gamma * self.qubits_per_node)

    @property
    def rounds(self) -> int:
        if self.iterations is not None:
            return self.iterations
        return int(math.floor(math.pi / 4 * math.sqrt(self.size)))


@dataclass
class GroverResult:
    measured: int
    success_probability: float
    iterations: int
    report: CommReport
    post_selection: float = 1.0
    distribution: np.ndarray = field(default=None, repr=False)


def grover_probability(size: int, iterations: int) -> float:
    theta = math.asin(1 / math.sqrt(size))
    return math.sin((2 * iterations + 1) * theta) ** 2


def _sign_flip(state, names, value, network, ledger, mode):
    """I - 2|value><value| as two pi/2 reflections"""
    probability = 1.0
    spec = ReflectionSpec(math.pi / 2, tuple(names), mode, value)
    for _ in range(2):
        state, p = dro_apply(spec, state, network, ledger)
        probability *= p
    return state, probability


def run_dgrover(inst: GroverInstance, network: Optional[NetworkTopology] = None, mode: str = DIRECT) -> GroverResult:
    network = network or star(inst.gamma)
    if network.gamma != inst.gamma:
        raise DomainError(f"Instance has {inst.gamma} nodes but the network has {network.gamma}")
    ledger = CommLedger(network)
    partition = contiguous_partition(inst.gamma * inst.qubits_per_node, inst.gamma)
    registers = tuple(Register(f"Q{g}", len(partition.qubits(g)), g) for g in range(1, inst.gamma + 1))
    names = [r.name for r in registers]
    state = product_state(RegisterLayout(registers), {})
    qubits = state.layout.qubits_of(names)
    hadamard(state, qubits)

    post_selection = 1.0
    for _ in range(inst.rounds):
        state, p = _sign_flip(state, names, inst.marked, network, ledger, mode)
        post_selection *= p
        hadamard(state, qubits)
        state, p = _sign_flip(state, names, 0, network, ledger, mode)
        post_selection *= p
        hadamard(state, qubits)
        apply_phase(state, -1.0, {})

    distribution = np.abs(state.vector) ** 2
    distribution /= distribution.sum()
    result = GroverResult(
        measured=int(np.argmax(distribution)),
        success_probability=float(distribution[inst.marked]),
        iterations=inst.rounds,
        report=ledger_report(ledger),
        post_selection=post_selection,
        distribution=distribution,
    )
    logging.info(
        f"d-Grover N={inst.size}, {inst.rounds} iterations: success probability {result.success_probability:.6f}, "
        f"{result.report.qubits_teleported} qubits teleported"
    )
    return result
