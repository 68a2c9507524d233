"""
Distributed truncated Taylor series.

The evolution is cut into segments of length ln2/alpha, so that the untruncated Taylor weight of a
segment is exactly 2 and one round of oblivious amplitude amplification makes it deterministic.
The order-K series is encoded in unary: K control-node qubits and K independent d-BE ancilla blocks.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from dqsim.errors import DomainError, PostSelectionError, TopologyError
from dqsim.lcu import BlockEncoding, apply_local_preps, apply_select, block_encoding, ceil_log2, reflect_ancillas
from dqsim.pauli import ClusteredHamiltonian, OperatorSum, QubitPartition, cluster, flatten
from dqsim.qnet import (
    CommLedger,
    NetworkTopology,
    apply_collection,
    apply_distribution,
    charge_fanout,
    ledger_report,
    star,
)
from dqsim.results import RunResult, compare_with_exact, system_input
from dqsim.statevector import (
    Register,
    StatePrep,
    StateVector,
    apply_phase,
    discard,
    exact_evolution,
    extend,
)

LN2 = math.log(2)
UNARY = "U"
TAIL_TERMS = 60


def taylor_tail(x: float, order: int) -> float:
    """sum_{k > order} x^k / k!"""
    term = x ** (order + 1) / math.factorial(order + 1)
    total = 0.0
    for k in range(order + 1, order + 1 + TAIL_TERMS):
        total += term
        term *= x / (k + 1)
    return total


def taylor_weight(x: float, order: int) -> float:
    """alpha_TS = sum_{k <= order} x^k / k!"""
    return sum(x**k / math.factorial(k) for k in range(order + 1))


@dataclass(frozen=True)
class TaylorPlan:
    K: int
    r: int
    segment_time: float
    residual_time: float
    alpha: float

    @property
    def alpha_ts(self) -> float:
        return taylor_weight(self.alpha * self.segment_time, self.K)

    @property
    def has_residual(self) -> bool:
        return self.residual_time < self.segment_time * (1 - 1e-12)

    @property
    def segment_bound(self) -> float:
        """Operator error allowed for one amplified segment"""
        return 2 * taylor_tail(LN2, self.K) + abs(2 - self.alpha_ts)


def segment_plan(alpha: float, t: float) -> Tuple[int, float]:
    """r = ceil(alpha t / ln2) segments of length ln2/alpha, the last one possibly shorter"""
    if alpha < 0 or t < 0:
        raise DomainError(f"Segment plan needs alpha >= 0 and t >= 0, got alpha={alpha}, t={t}")
    if alpha == 0 or t == 0:
        return 0, 0.0
    return max(1, math.ceil(alpha * t / LN2 * (1 - 1e-12))), LN2 / alpha


def order_for_budget(budget: float) -> int:
    """Smallest K whose per-segment tail sum_{k > K} ln2^k / k! is within budget"""
    if budget <= 0:
        raise DomainError(f"Truncation budget must be positive, got {budget}")
    order = 0
    while taylor_tail(LN2, order) > budget:
        order += 1
    return order


def truncation_order(alpha: float, t: float, epsilon: float) -> int:
    if epsilon <= 0:
        raise DomainError(f"Error target must be positive, got {epsilon}")
    r, _ = segment_plan(alpha, t)
    return order_for_budget(epsilon / (2 * max(r, 1)))


def taylor_plan(alpha: float, t: float, epsilon: Optional[float] = None, K: Optional[int] = None) -> TaylorPlan:
    r, segment_time = segment_plan(alpha, t)
    if K is None:
        if epsilon is None:
            raise DomainError("Either a truncation order K or an error target epsilon is required")
        K = truncation_order(alpha, t, epsilon)
    residual = t - (r - 1) * segment_time if r else 0.0
    return TaylorPlan(max(1, K), r, segment_time, residual, alpha)


@dataclass(frozen=True)
class UnaryTaylor:
    """
    B_unary and select_unary of one segment of length `time`. The unary register holds the codewords
    |1^k 0^(K-k)>; block i is a full copy of the d-BE ancillas, fired by unary qubit i.
    """

    blocks: Tuple[BlockEncoding, ...]
    unary_prep: StatePrep
    time: float

    @property
    def K(self) -> int:
        return len(self.blocks)

    @property
    def alpha_ts(self) -> float:
        return taylor_weight(self.blocks[0].alpha * self.time, self.K)

    def registers(self) -> Tuple[Register, ...]:
        return (Register(UNARY, self.K, "control"),) + tuple(r for b in self.blocks for r in b.registers())

    @property
    def ancilla_names(self) -> Tuple[str, ...]:
        return tuple(r.name for r in self.registers())

    def prepare(self, state: StateVector, ledger: CommLedger, adjoint: bool = False) -> StateVector:
        """B_unary; its inverse runs the same pieces in reverse with the same charges"""
        network = ledger.topology
        if not adjoint:
            self.unary_prep.apply(state, state.layout.qubits(UNARY))
        for be in self.blocks:
            if adjoint:
                apply_local_preps(state, be)
                apply_collection(state, be.control_prep, be.control_registers, network, ledger, "return")
            else:
                apply_distribution(state, be.control_prep, be.control_registers, network, ledger, "distribute-G_C")
                apply_local_preps(state, be)
        if adjoint:
            self.unary_prep.apply(state, state.layout.qubits(UNARY))
        return state

    def select(self, state: StateVector, ledger: CommLedger, adjoint: bool = False) -> StateVector:
        """Product over i of (|0><0|_i + (-i)|1><1|_i select_i); the adjoint runs the blocks in reverse"""
        unary = state.layout.qubits(UNARY)
        order = list(enumerate(self.blocks))
        for i, be in reversed(order) if adjoint else order:
            fired = {unary[i]: 1}
            charge_fanout(ledger.topology, ledger, 1, "control fan-out")
            apply_select(state, be, fired)
            apply_phase(state, 1j if adjoint else -1j, fired)
        return state

    def walk(self, state: StateVector, ledger: CommLedger, adjoint: bool = False) -> StateVector:
        self.prepare(state, ledger)
        self.select(state, ledger, adjoint)
        return self.prepare(state, ledger, adjoint=True)


def unary_amplitudes(x: float, K: int) -> np.ndarray:
    amplitudes = np.zeros(2**K, dtype=complex)
    for k in range(K + 1):
        codeword = ((1 << k) - 1) << (K - k)
        amplitudes[codeword] = math.sqrt(x**k / math.factorial(k))
    return amplitudes / np.linalg.norm(amplitudes)


def build_unary_operators(ch: ClusteredHamiltonian, K: int, time: Optional[float] = None) -> UnaryTaylor:
    if K < 1:
        raise DomainError(f"Unary encoding needs K >= 1, got {K}")
    time = LN2 / ch.alpha if time is None else time
    blocks = tuple(block_encoding(ch, suffix=f"_{i}") for i in range(1, K + 1))
    return UnaryTaylor(blocks, StatePrep(unary_amplitudes(ch.alpha * time, K)), time)


def amplified_segment(ops: UnaryTaylor, state: StateVector, ledger: CommLedger) -> StateVector:
    """-W R W^dagger R W on the system plus fresh ancillas, ancillas projected back to |0> afterwards"""
    names = ops.ancilla_names
    work = extend(state, ops.registers())
    ops.walk(work, ledger)
    reflect_ancillas(work, names, ledger)
    ops.walk(work, ledger, adjoint=True)
    reflect_ancillas(work, names, ledger)
    ops.walk(work, ledger)
    apply_phase(work, -1.0, {})
    return discard(work, names)


def post_selected_segment(ops: UnaryTaylor, state: StateVector, ledger: CommLedger) -> Tuple[StateVector, float]:
    """Single W, post-selected on |0> ancillas and rescaled by alpha_TS"""
    norm_in = state.norm()
    work = extend(state, ops.registers())
    ops.walk(work, ledger)
    out = discard(work, ops.ancilla_names)
    probability = (out.norm() / norm_in) ** 2
    if probability < 1e-14:
        raise PostSelectionError(f"Residual Taylor segment has success probability {probability:.3e}")
    out.amplitudes *= ops.alpha_ts
    return out, float(probability)


def predicted_cost_dts(ch: ClusteredHamiltonian, t: float, epsilon: float) -> Tuple[float, str]:
    K = truncation_order(ch.alpha, t, epsilon) if ch.alpha > 0 else 0
    value = ch.alpha * t * ch.gamma * ceil_log2(ch.num_edges + ch.gamma) * K
    return value, "alpha t Gamma ceil(log2(|E| + Gamma)) K, unit constant"


def run_dts(
    h: OperatorSum,
    partition: QubitPartition,
    t: float,
    epsilon: Optional[float] = None,
    network: Optional[NetworkTopology] = None,
    K: Optional[int] = None,
    input_state: Optional[np.ndarray] = None,
) -> RunResult:
    ch = cluster(h, partition)
    network = network or star(partition.gamma)
    if network.gamma != partition.gamma:
        raise TopologyError(f"Partition has {partition.gamma} nodes but the network has {network.gamma}")
    ledger = CommLedger(network)
    exact = exact_evolution(flatten(ch), t)
    plan = taylor_plan(ch.alpha, t, epsilon, K)

    probability = 1.0
    ancilla_qubits = 0
    if plan.r:
        full = build_unary_operators(ch, plan.K, plan.segment_time)
        ancilla_qubits = sum(r.width for r in full.registers())
    initial = system_input(ch.qubit_count, ancilla_qubits, input_state)
    state = initial.copy()
    logging.info(f"d-TS K={plan.K} r={plan.r} on {ch.qubit_count} qubits, alpha={ch.alpha:.6g}")
    for segment in range(plan.r):
        last = segment == plan.r - 1
        if last and plan.has_residual:
            residual = build_unary_operators(ch, plan.K, plan.residual_time)
            state, probability = post_selected_segment(residual, state, ledger)
            logging.debug(f"Residual segment of length {plan.residual_time:.6g}, success probability {probability:.6f}")
        else:
            state = amplified_segment(full, state, ledger)
            logging.debug(f"Segment {segment + 1}/{plan.r} amplified")

    output, error, kind = compare_with_exact(state, exact, initial)
    predicted, formula = predicted_cost_dts(ch, t, epsilon) if epsilon else (float("nan"), "needs epsilon")
    result = RunResult(
        protocol="dts",
        output=output,
        error=error,
        error_kind=kind,
        report=ledger_report(ledger),
        predicted_cost=predicted,
        prediction_formula=formula,
        steps=plan.r,
        gamma=ch.gamma,
        qubits=ch.qubit_count,
        edges=ch.num_edges,
        t=t,
        epsilon=epsilon,
        success_probability=probability,
        metadata={"K": plan.K, "alpha_ts": plan.alpha_ts, "error_bound": plan.r * plan.segment_bound},
    )
    logging.info(f"d-TS finished: {kind} error {error:.3e}, {result.report.qubits_teleported} qubits teleported")
    return result
