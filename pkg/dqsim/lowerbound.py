"""
Circuit-to-Hamiltonian gadgets.

A gate list U_1..U_N becomes H_U = sum_j sqrt(j (N - j + 1)) (|j><j-1|_clock (x) U_j + h.c.) on a binary
clock. On the history states it acts as 2 J_x of a spin N/2, so evolving for pi/2 carries clock |0> to
clock |N> with the work register holding U_N..U_1 |psi_0>.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
import scipy.stats

from dqsim.errors import DomainError, ShapeError
from dqsim.lcu import register_width
from dqsim.statevector import (
    RegisterLayout,
    UnitarySpec,
    apply_unitary,
    as_operator,
    exact_evolution,
    gate,
    identity_batch,
    layout,
)
from dqsim.utils.caps import check_dense

Gate = Union[UnitarySpec, np.ndarray]


def gate_matrix(g: Gate, work_qubits: int) -> np.ndarray:
    if isinstance(g, UnitarySpec):
        state = identity_batch(layout(("work", work_qubits, None)))
        return as_operator(apply_unitary(state, g))
    m = np.asarray(g, dtype=complex)
    if m.shape != (2**work_qubits,) * 2:
        raise ShapeError(f"Gate of shape {m.shape} does not act on {work_qubits} work qubits")
    return m


@dataclass(frozen=True)
class ClockedHamiltonian:
    gates: Tuple[np.ndarray, ...]
    work_qubits: int
    clock_width: int
    matrix: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.gates)

    @property
    def couplings(self) -> np.ndarray:
        n = self.steps
        return np.sqrt([j * (n - j + 1) for j in range(1, n + 1)])

    @property
    def total_qubits(self) -> int:
        return self.clock_width + self.work_qubits

    def history_state(self, psi0: np.ndarray) -> np.ndarray:
        """|0>_clock (x) psi0"""
        clock = np.zeros(2**self.clock_width, dtype=complex)
        clock[0] = 1.0
        return np.kron(clock, np.asarray(psi0, dtype=complex))


def circuit_to_hamiltonian(gates: Sequence[Gate], work_qubits: int) -> ClockedHamiltonian:
    if not gates:
        raise DomainError("Circuit needs at least one gate")
    n = len(gates)
    width = register_width(n + 1)
    check_dense(width + work_qubits, "clocked Hamiltonian")
    matrices = tuple(gate_matrix(g, work_qubits) for g in gates)
    dim_clock = 2**width
    h = np.zeros((dim_clock * 2**work_qubits,) * 2, dtype=complex)
    for j, u in enumerate(matrices, start=1):
        hop = np.zeros((dim_clock, dim_clock))
        hop[j, j - 1] = math.sqrt(j * (n - j + 1))
        term = np.kron(hop, u)
        h += term + term.conj().T
    return ClockedHamiltonian(matrices, work_qubits, width, h)


def run_pst(ch: ClockedHamiltonian, psi0: np.ndarray, t: float = math.pi / 2) -> Tuple[float, np.ndarray]:
    """Probability of reading clock |N> after evolving for t, and the normalized work state in that branch"""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (2**ch.work_qubits,):
        raise ShapeError(f"Initial work state has shape {psi0.shape}, expected ({2 ** ch.work_qubits},)")
    out = exact_evolution(ch.matrix, t) @ ch.history_state(psi0 / np.linalg.norm(psi0))
    blocks = out.reshape(2**ch.clock_width, 2**ch.work_qubits)
    branch = blocks[ch.steps]
    probability = float(np.vdot(branch, branch).real)
    conditional = branch / math.sqrt(probability) if probability > 0 else branch
    return probability, conditional


def circuit_output(ch: ClockedHamiltonian, psi0: np.ndarray) -> np.ndarray:
    out = np.asarray(psi0, dtype=complex)
    for u in ch.gates:
        out = u @ out
    return out / np.linalg.norm(out)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2, insensitive to global phase"""
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def random_gate_list(rng: np.random.Generator, steps: int, work_qubits: int = 1) -> List[np.ndarray]:
    return [scipy.stats.unitary_group.rvs(2**work_qubits, random_state=rng) for _ in range(steps)]


@dataclass(frozen=True)
class IpInstance:
    """One bit string per party; the value is sum_i prod_gamma x_gamma[i] mod 2"""

    strings: Tuple[str, ...]

    def __post_init__(self):
        if len(self.strings) < 2:
            raise DomainError(f"Inner product needs at least two parties, got {len(self.strings)}")
        lengths = {len(s) for s in self.strings}
        if len(lengths) != 1 or 0 in lengths:
            raise ShapeError(f"Inner product strings must share one non-zero length, got {sorted(lengths)}")
        if set("".join(self.strings)) - set("01"):
            raise ShapeError(f"Inner product strings must be binary, got {self.strings}")

    @property
    def gamma(self) -> int:
        return len(self.strings)

    @property
    def n(self) -> int:
        return len(self.strings[0])

    @property
    def value(self) -> int:
        return sum(all(s[i] == "1" for s in self.strings) for i in range(self.n)) % 2

    @property
    def work_state(self) -> np.ndarray:
        """|x_1 .. x_gamma>|0>_o"""
        index = int("".join(self.strings) + "0", 2)
        state = np.zeros(2 ** (self.gamma * self.n + 1), dtype=complex)
        state[index] = 1.0
        return state


def ip_circuit(inst: IpInstance) -> List[UnitarySpec]:
    return mcx_ladder(inst.gamma, inst.n)


def mcx_ladder(gamma: int, n: int) -> List[UnitarySpec]:
    """One multi-controlled NOT per position i, controlled by x_gamma[i] of every party, onto the output qubit"""
    output = gamma * n
    return [gate("MCX", *(g * n + i for g in range(gamma)), output) for i in range(n)]


def ip_layout(gamma: int, n: int) -> RegisterLayout:
    registers = [("clock", register_width(n + 1), "control")]
    registers += [(f"x{g}", n, g) for g in range(1, gamma + 1)]
    registers += [("o", 1, "control")]
    return layout(*registers)


def ip_qubit_count(n: int, gamma: int = 2) -> int:
    return ip_layout(gamma, n).total_qubits


@functools.lru_cache(maxsize=16)
def ip_evolution(gamma: int, n: int) -> Tuple[ClockedHamiltonian, np.ndarray]:
    """H_IP and exp(-i H_IP pi/2); the gates do not depend on the inputs, so both are shared by all instances"""
    ch = circuit_to_hamiltonian(mcx_ladder(gamma, n), gamma * n + 1)
    logging.debug(f"H_IP built for gamma={gamma}, n={n} on {ch.total_qubits} qubits")
    return ch, exact_evolution(ch.matrix, math.pi / 2)


def ip_via_dynamics(inst: IpInstance) -> int:
    ch, evolution = ip_evolution(inst.gamma, inst.n)
    out = evolution @ ch.history_state(inst.work_state)
    # output qubit is the last one
    probs = np.abs(out.reshape(-1, 2)) ** 2
    return int(probs[:, 1].sum() > 0.5)
