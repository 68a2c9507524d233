"""
Distributed product formulas.

Each Trotter step runs the Suzuki stages over the summands H_0 (all node-local parts) and H_e
(one per interaction term). Local exponentials are exact and free; every interaction exponential
shuttles one ancilla through the support nodes and is charged for each move.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from dqsim.errors import CapabilityError, DomainError, MisuseError, TopologyError
from dqsim.pauli import (
    ClusteredHamiltonian,
    InteractionTerm,
    OperatorSum,
    PauliString,
    QubitPartition,
    cluster,
    dense_matrix,
    flatten,
    nested_commutator_norm,
    one_norm,
    operator_sum,
)
from dqsim.qnet import CONTROL, CommLedger, NetworkTopology, ledger_report, star
from dqsim.results import RunResult, compare_with_exact, system_input
from dqsim.statevector import (
    GATES,
    HADAMARD,
    Register,
    StateVector,
    apply_matrix,
    apply_pauli_exponential,
    cnot,
    discard,
    exact_evolution,
    extend,
    operator_distance,
)

ANCILLA = "pf_anc"
MAX_EMPIRICAL_STEPS = 2**16

# B Y B^dagger = Z
Y_TO_Z = HADAMARD @ GATES["SDG"]


@dataclass(frozen=True)
class TrotterSchedule:
    """
    Stage y applies every summand with coefficient a_y, in index order or reversed.
    The same coefficient is used for all summands of a stage.
    """

    order: int
    stage_coefficients: Tuple[float, ...]
    reversed_stages: Tuple[bool, ...]

    @property
    def stages(self) -> int:
        return len(self.stage_coefficients)

    def coefficient(self, stage: int, summand: int = 0) -> float:
        return self.stage_coefficients[stage]

    def permutation(self, stage: int, count: int) -> List[int]:
        order = list(range(count))
        return order[::-1] if self.reversed_stages[stage] else order


def _suzuki_weights(p: int) -> List[float]:
    """Time weights of the second-order formulas composing the order-p Suzuki formula"""
    if p == 2:
        return [1.0]
    u = 1.0 / (4.0 - 4.0 ** (1.0 / (p - 1)))
    inner = _suzuki_weights(p - 2)
    outer = []
    for w in (u, u, 1.0 - 4.0 * u, u, u):
        outer.extend(w * x for x in inner)
    return outer


def suzuki_schedule(p: int) -> TrotterSchedule:
    if p == 1:
        return TrotterSchedule(1, (1.0,), (False,))
    if p < 1 or p % 2:
        raise DomainError(f"Unsupported product formula order {p}, use 1 or an even order")
    coefficients = []
    directions = []
    for w in _suzuki_weights(p):
        coefficients += [w / 2, w / 2]
        directions += [False, True]
    return TrotterSchedule(p, tuple(coefficients), tuple(directions))


@dataclass(frozen=True)
class SegmentPlan:
    r: int
    angles: Tuple[float, ...]


def segment_plan(schedule: TrotterSchedule, t: float, r: int) -> SegmentPlan:
    if r < 1:
        raise DomainError(f"Trotter step count must be >= 1, got {r}")
    return SegmentPlan(r, tuple(a * t / r for a in schedule.stage_coefficients))


def commutator_norm_for_order(ch: ClusteredHamiltonian, p: int) -> float:
    """Nested commutator norm for p <= 2, triangle bound above"""
    if p <= 2:
        return nested_commutator_norm(ch, p).value
    total = sum(one_norm(s) for s in ch.summands())
    return 2**p * total ** (p + 1)


def steps_from_norm(alpha_comm: float, p: int, t: float, epsilon: float) -> int:
    if epsilon <= 0:
        raise DomainError(f"Error target must be positive, got {epsilon}")
    value = alpha_comm ** (1 / p) * abs(t) ** (1 + 1 / p) / epsilon ** (1 / p)
    return max(1, math.ceil(value * (1 - 1e-12)))


def trotter_operator(ch: ClusteredHamiltonian, schedule: TrotterSchedule, t: float, r: int) -> np.ndarray:
    """Dense product-formula unitary for r steps, without any ledger"""
    summands = [dense_matrix(s) for s in ch.summands()]
    exponentials: Dict[Tuple[int, float], np.ndarray] = {}
    step = np.eye(summands[0].shape[0], dtype=complex)
    for y, angle in enumerate(segment_plan(schedule, t, r).angles):
        for e in schedule.permutation(y, len(summands)):
            key = (e, angle)
            if key not in exponentials:
                exponentials[key] = exact_evolution(summands[e], angle)
            step = exponentials[key] @ step
    return np.linalg.matrix_power(step, r)


def required_steps(ch: ClusteredHamiltonian, p: int, t: float, epsilon: float, mode: str = "formula") -> int:
    """Trotter steps for error epsilon: unit-constant commutator formula, or measured with a binary search"""
    schedule = suzuki_schedule(p)
    if mode == "formula":
        return steps_from_norm(commutator_norm_for_order(ch, p), p, t, epsilon)
    if mode != "empirical":
        raise DomainError(f"Unknown step mode '{mode}', use 'formula' or 'empirical'")
    exact = exact_evolution(flatten(ch), t)

    def error(r: int) -> float:
        return operator_distance(trotter_operator(ch, schedule, t, r), exact)

    if error(1) <= epsilon:
        return 1
    low, high = 1, 2
    while error(high) > epsilon:
        low, high = high, high * 2
        if high > MAX_EMPIRICAL_STEPS:
            raise CapabilityError(f"No step count up to {MAX_EMPIRICAL_STEPS} reaches error {epsilon}")
    while high - low > 1:
        middle = (low + high) // 2
        if error(middle) <= epsilon:
            high = middle
        else:
            low = middle
    return high


def interaction_exponential(
    state: StateVector,
    term: InteractionTerm,
    angle: float,
    partition: QubitPartition,
    ledger: CommLedger,
    ancilla: str = ANCILLA,
) -> StateVector:
    """
    exp(-i angle c P) for a Pauli string spanning several nodes. Local basis changes map P to Z..Z, the
    ancilla collects the parity node by node, takes the Z rotation and uncomputes the parity on a second
    pass. Each pass moves the ancilla from its home node to every support node and back.
    """
    if len(term.support_nodes) < 2:
        raise MisuseError(f"Term {term.string} lies on a single node, use a local exponential")
    network = ledger.topology
    home = CONTROL if network.has_control else term.support_nodes[0]
    target = state.layout.qubits(ancilla)[0]
    support = term.string.support
    by_node = {g: [q for q in support if partition.node_of[q] == g] for g in term.support_nodes}

    _basis_change(state, term.string, support, inverse=False)
    _parity_ladder(state, by_node, target, home, ledger)
    apply_pauli_exponential(state, term.coeff, PauliString("Z"), angle, (target,))
    _parity_ladder(state, by_node, target, home, ledger)
    _basis_change(state, term.string, support, inverse=True)
    return state


def _basis_change(state: StateVector, string: PauliString, support: Tuple[int, ...], inverse: bool):
    for q in support:
        axis = string.axes[q]
        if axis == "X":
            apply_matrix(state, HADAMARD, (q,))
        elif axis == "Y":
            apply_matrix(state, Y_TO_Z.conj().T if inverse else Y_TO_Z, (q,))


def _parity_ladder(state: StateVector, by_node: Dict[int, List[int]], target: int, home: int, ledger: CommLedger):
    for node, qubits in by_node.items():
        ledger.send(home, node, 1, "interaction")
        for q in qubits:
            cnot(state, q, target)
        ledger.send(node, home, 1, "interaction")
        ledger.next_round(2 if node != home else 0)


class LocalExponentials:
    """exp(-i angle H_gamma) on the qubits of each node, cached per angle"""

    def __init__(self, ch: ClusteredHamiltonian):
        self.ch = ch
        self.cache: Dict[Tuple[int, float], np.ndarray] = {}

    def apply(self, state: StateVector, angle: float) -> StateVector:
        for g in range(1, self.ch.gamma + 1):
            local = self.ch.locals[g]
            if not local.terms:
                continue
            qubits = self.ch.partition.qubits(g)
            key = (g, angle)
            if key not in self.cache:
                restricted = operator_sum([(c, s.restrict(qubits)) for c, s in local.terms], len(qubits))
                self.cache[key] = exact_evolution(restricted, angle)
            apply_matrix(state, self.cache[key], qubits)
        return state


def predicted_cost_dpf(ch: ClusteredHamiltonian, p: int, t: float, epsilon: float) -> Tuple[float, str]:
    if epsilon <= 0:
        raise DomainError(f"Error target must be positive, got {epsilon}")
    alpha_comm = commutator_norm_for_order(ch, p)
    value = ch.num_edges * ch.gamma * alpha_comm ** (1 / p) * abs(t) ** (1 + 1 / p) / epsilon ** (1 / p)
    return value, "|E| Gamma alpha_comm^(1/p) t^(1+1/p) / eps^(1/p), unit constant"


def run_dpf(
    h: OperatorSum,
    partition: QubitPartition,
    t: float,
    p: int = 1,
    r: Optional[int] = None,
    epsilon: Optional[float] = None,
    network: Optional[NetworkTopology] = None,
    input_state: Optional[np.ndarray] = None,
    step_mode: str = "formula",
) -> RunResult:
    """Simulate exp(-iHt) with r Trotter steps of the order-p formula, either r or epsilon must be given"""
    ch = cluster(h, partition)
    network = network or star(partition.gamma)
    if network.gamma != partition.gamma:
        raise TopologyError(f"Partition has {partition.gamma} nodes but the network has {network.gamma}")
    schedule = suzuki_schedule(p)
    if r is None:
        if epsilon is None:
            raise DomainError("Either a step count r or an error target epsilon is required")
        r = required_steps(ch, p, t, epsilon, step_mode)
    plan = segment_plan(schedule, t, r)
    logging.info(f"d-PF p={p} r={r} on {ch.qubit_count} qubits, {ch.gamma} nodes, {ch.num_edges} interaction terms")

    ledger = CommLedger(network)
    initial = system_input(ch.qubit_count, 1, input_state)
    work = extend(initial.copy(), [Register(ANCILLA, 1, "control")])
    locals_ = LocalExponentials(ch)
    for _ in range(r):
        for y, angle in enumerate(plan.angles):
            for e in schedule.permutation(y, ch.num_edges + 1):
                if e == 0:
                    locals_.apply(work, angle)
                else:
                    interaction_exponential(work, ch.interactions[e - 1], angle, partition, ledger)
    out = discard(work, [ANCILLA])

    exact = exact_evolution(flatten(ch), t)
    output, error, kind = compare_with_exact(out, exact, initial)
    if epsilon is not None:
        predicted, formula = predicted_cost_dpf(ch, p, t, epsilon)
    else:
        predicted, formula = float("nan"), "needs epsilon"
    result = RunResult(
        protocol="dpf",
        output=output,
        error=error,
        error_kind=kind,
        report=ledger_report(ledger),
        predicted_cost=predicted,
        prediction_formula=formula,
        steps=r,
        gamma=ch.gamma,
        qubits=ch.qubit_count,
        edges=ch.num_edges,
        t=t,
        epsilon=epsilon,
        metadata={"order": p, "stages": schedule.stages},
    )
    logging.info(f"d-PF finished: {kind} error {error:.3e}, {result.report.qubits_teleported} qubits teleported")
    return result
