"""
Distributed quantum signal processing.

The walk W = (2 Pi - I) U_BE rotates every eigenvalue-lambda plane by arccos(lambda / alpha), so a
phased walk sequence applies a polynomial of H / alpha. cos(tau x) / 2 and sin(tau x) / 2 are synthesized
as real parts of two definite-parity sequences, and a four-branch LCU over the sequences and their
conjugates assembles exp(-i tau x).
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize
import scipy.special
from numpy.polynomial import chebyshev

from dqsim.errors import DomainError, PhaseSynthesisError, PostSelectionError, TopologyError
from dqsim.lcu import BlockEncoding, apply_dbe, block_encoding, ceil_log2, value_controls
from dqsim.pauli import ClusteredHamiltonian, OperatorSum, QubitPartition, cluster, flatten
from dqsim.qnet import CommLedger, NetworkTopology, charge_fanout, ledger_report, star
from dqsim.results import RunResult, compare_with_exact, system_input
from dqsim.statevector import (
    Register,
    StateVector,
    apply_phase,
    as_operator,
    discard,
    exact_evolution,
    extend,
    hadamard,
    identity_batch,
)
from dqsim.utils.file import save_json

CONVENTION = "reflection"
BRANCH = "B"
GRID_POINTS = 32
BESSEL_LOOKAHEAD = 60
SYNTHESIS_ATTEMPTS = 8


def chebyshev_grid(points: int = GRID_POINTS) -> np.ndarray:
    j = np.arange(1, points + 1)
    return np.cos((2 * j - 1) * np.pi / (2 * points))


@dataclass(frozen=True)
class JacobiAngerSeries:
    """e^{i tau x} = J_0 + 2 sum_k i^k J_k(tau) T_k(x), truncated after degree q"""

    tau: float
    q: int
    coefficients: np.ndarray
    epsilon: float

    @property
    def bessel(self) -> np.ndarray:
        return np.real(self.coefficients * (-1j) ** np.arange(self.q + 1))

    def cos_chebyshev(self) -> np.ndarray:
        """Chebyshev coefficients of cos(tau x)"""
        c = np.zeros(self.q + 1)
        for k in range(0, self.q + 1, 2):
            c[k] = self.bessel[k] if k == 0 else 2 * (-1) ** (k // 2) * self.bessel[k]
        return c

    def sin_chebyshev(self) -> np.ndarray:
        """Chebyshev coefficients of sin(tau x)"""
        c = np.zeros(self.q + 1)
        for k in range(1, self.q + 1, 2):
            c[k] = 2 * (-1) ** ((k - 1) // 2) * self.bessel[k]
        return c


def jacobi_anger_truncation(tau: float, epsilon: float) -> JacobiAngerSeries:
    """Smallest q >= 1 with 2 sum_{k > q} |J_k(tau)| <= epsilon / 2"""
    if tau <= 0 or epsilon <= 0:
        raise DomainError(f"Jacobi-Anger truncation needs tau > 0 and epsilon > 0, got tau={tau}, epsilon={epsilon}")
    top = int(math.ceil(abs(tau))) + BESSEL_LOOKAHEAD
    values = scipy.special.jv(np.arange(top + 1), tau)
    tails = 2 * np.cumsum(np.abs(values[::-1]))[::-1]
    q = 1
    while q < top and tails[q + 1] > epsilon / 2:
        q += 1
    coefficients = (1j ** np.arange(q + 1)) * values[: q + 1]
    return JacobiAngerSeries(float(tau), q, coefficients, float(epsilon))


@dataclass(frozen=True)
class QspPhaseSequence:
    """Symmetric phases phi_0..phi_d; Re <0| e^{i phi_0 Z} prod_k W(x) e^{i phi_k Z} |0> matches the target"""

    angles: np.ndarray
    parity: int
    degree: int
    error: float
    target: np.ndarray

    def response(self, x: np.ndarray) -> np.ndarray:
        return qsp_response(self.angles, x)


def qsp_response(angles: Sequence[float], x: np.ndarray) -> np.ndarray:
    """<0|U_Phi(x)|0> with signal W(x) = [[x, i sqrt(1-x^2)], [i sqrt(1-x^2), x]]"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1 - x**2, 0, None))
    w = np.empty((len(x), 2, 2), dtype=complex)
    w[:, 0, 0] = w[:, 1, 1] = x
    w[:, 0, 1] = w[:, 1, 0] = 1j * s
    u = np.broadcast_to(np.diag([np.exp(1j * angles[0]), np.exp(-1j * angles[0])]), (len(x), 2, 2)).copy()
    for phi in angles[1:]:
        u = u @ w * np.array([np.exp(1j * phi), np.exp(-1j * phi)])
    return u[:, 0, 0]


def _symmetric(free: np.ndarray, degree: int) -> np.ndarray:
    tail = free[::-1] if degree % 2 else free[-2::-1]
    return np.concatenate([free, tail])


def _parity(coefficients: np.ndarray) -> int:
    nonzero = {k % 2 for k, c in enumerate(coefficients) if abs(c) > 1e-15}
    if len(nonzero) > 1:
        raise DomainError("QSP target must have definite parity")
    return nonzero.pop() if nonzero else 0


def _residual(angles: np.ndarray, coefficients: np.ndarray) -> float:
    grid = chebyshev_grid()
    return float(np.max(np.abs(qsp_response(angles, grid).real - chebyshev.chebval(grid, coefficients))))


def solve_phases(coefficients: Sequence[float], tol: float = 1e-10, seed: int = 0) -> QspPhaseSequence:
    """
    Phases whose response has real part equal to the Chebyshev series `coefficients`.
    Degrees 0 and 1 are solved in closed form, higher degrees by least squares on the positive
    Chebyshev nodes from a fixed list of starting points.
    """
    coefficients = np.trim_zeros(np.asarray(coefficients, dtype=float), "b")
    if coefficients.size == 0:
        coefficients = np.zeros(1)
    degree = len(coefficients) - 1
    parity = _parity(coefficients)
    if degree % 2 != parity:
        degree += 1
        coefficients = np.append(coefficients, 0.0)
    checkpoints = np.concatenate(([-1.0, 1.0], chebyshev_grid(4 * GRID_POINTS)))
    peak = np.max(np.abs(chebyshev.chebval(checkpoints, coefficients)))
    if peak > 1 - tol:
        raise DomainError(f"QSP target reaches {peak:.6g} on [-1, 1], must stay below 1")

    if degree == 0:
        angles = np.array([math.acos(coefficients[0])])
    elif degree == 1:
        half = math.acos(coefficients[1]) / 2
        angles = np.array([half, half])
    else:
        angles = _fit_phases(coefficients, degree, tol, seed)
    residual = _residual(angles, coefficients)
    if residual > tol:
        raise PhaseSynthesisError(f"Phase synthesis for degree {degree} stopped at residual {residual:.3e}", residual)
    return QspPhaseSequence(angles, parity, degree, residual, coefficients)


def _fit_phases(coefficients: np.ndarray, degree: int, tol: float, seed: int) -> np.ndarray:
    free_count = (degree + 2) // 2
    j = np.arange(1, free_count + 1)
    nodes = np.cos((2 * j - 1) * np.pi / (4 * free_count))
    targets = chebyshev.chebval(nodes, coefficients)

    def residuals(free: np.ndarray) -> np.ndarray:
        return qsp_response(_symmetric(free, degree), nodes).real - targets

    rng = np.random.default_rng(seed)
    first = np.zeros(free_count)
    first[0] = np.pi / 4
    starts = [first, np.zeros(free_count)] + [rng.uniform(-np.pi, np.pi, free_count) for _ in range(SYNTHESIS_ATTEMPTS)]
    best, best_residual = None, np.inf
    for attempt, start in enumerate(starts):
        fit = scipy.optimize.least_squares(residuals, start, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        angles = _symmetric(fit.x, degree)
        residual = _residual(angles, coefficients)
        logging.debug(f"Phase fit attempt {attempt}: degree {degree}, grid residual {residual:.3e}")
        if residual < best_residual:
            best, best_residual = angles, residual
        if residual <= tol:
            break
    return best


def simulation_phases(series: JacobiAngerSeries, tol: float = 1e-10) -> Tuple[QspPhaseSequence, QspPhaseSequence]:
    """Sequences for cos(tau x) / 2 and sin(tau x) / 2"""
    return solve_phases(series.cos_chebyshev() / 2, tol), solve_phases(series.sin_chebyshev() / 2, tol)


def save_phases(filename: str, series: JacobiAngerSeries, sequences: Tuple[QspPhaseSequence, QspPhaseSequence]):
    doc = {
        "tau": series.tau,
        "epsilon": series.epsilon,
        "convention": CONVENTION,
        "sequences": [
            {"part": part, "angles": [float(a) for a in seq.angles], "error": seq.error}
            for part, seq in zip(("cos", "sin"), sequences)
        ],
    }
    save_json(doc, filename)


def load_phases(filename: str, tol: float = 1e-10) -> Tuple[JacobiAngerSeries, Tuple[QspPhaseSequence, ...]]:
    """Read a phase sidecar and check every sequence against its target again"""
    with open(filename) as f:
        doc = json.load(f)
    series = jacobi_anger_truncation(doc["tau"], doc["epsilon"])
    targets = {"cos": series.cos_chebyshev() / 2, "sin": series.sin_chebyshev() / 2}
    sequences = []
    for entry in doc["sequences"]:
        coefficients = np.trim_zeros(targets[entry["part"]], "b")
        angles = np.asarray(entry["angles"], dtype=float)
        residual = _residual(angles, coefficients)
        if residual > max(tol, entry["error"] * 10):
            message = f"{filename}: {entry['part']} phases miss their target by {residual:.3e}"
            raise PhaseSynthesisError(message, residual)
        sequences.append(QspPhaseSequence(angles, int(entry["part"] == "sin"), len(angles) - 1, residual, coefficients))
    return series, tuple(sequences)


def walk_step(state: StateVector, be: BlockEncoding, ledger: CommLedger, controls: Optional[Dict[int, int]] = None):
    """W = (2 Pi - I) U_BE, with the reflection charged as one d-RO"""
    apply_dbe(state, be, ledger, controls)
    reflect_outside(state, be, {} if controls is None else controls, -1.0)
    charge_fanout(ledger.topology, ledger, 1, "d-RO")
    return state


def reflect_outside(state: StateVector, be: BlockEncoding, controls: Dict[int, int], phase: complex):
    """Multiply every component outside the all-zero ancilla subspace by `phase`"""
    apply_phase(state, phase, controls)
    apply_phase(state, 1 / phase, {**controls, **value_controls(state.layout, be.ancilla_names, 0)})


def qubitized_walk(be: BlockEncoding) -> np.ndarray:
    """Dense walk operator on the system plus d-BE ancillas"""
    state = identity_batch(be.layout())
    walk_step(state, be, CommLedger(star(be.gamma)))
    return as_operator(state)


def predicted_cost_dqsp(ch: ClusteredHamiltonian, t: float, epsilon: float) -> Tuple[float, str]:
    if epsilon <= 0:
        raise DomainError(f"Error target must be positive, got {epsilon}")
    value = ch.gamma * ceil_log2(ch.num_edges + ch.gamma) * (ch.alpha * t + math.log(1 / epsilon))
    return value, "Gamma ceil(log2(|E| + Gamma)) (alpha t + ln(1/eps)), unit constant"


def _branches(sequences: Tuple[QspPhaseSequence, QspPhaseSequence]):
    """(part, sign, weight, angles) for U_Phi and U_-Phi of both parts; the sin parts carry -i"""
    for part, seq in enumerate(sequences):
        for sign in (1, -1):
            yield part, sign, (1.0 if part == 0 else -1j), sign * seq.angles


def apply_qsp_sequences(
    state: StateVector,
    be: BlockEncoding,
    sequences: Tuple[QspPhaseSequence, QspPhaseSequence],
    ledger: CommLedger,
) -> int:
    """
    Run all four branches through one walk sequence. Walk calls are shared and only the phase
    operators depend on the branch; the single extra call of the longer sequence is controlled on
    the part bit. Returns the number of walk calls.
    """
    part_bit, sign_bit = state.layout.qubits(BRANCH)
    hadamard(state, (part_bit, sign_bit))
    branches = list(_branches(sequences))
    degrees = [seq.degree for seq in sequences]
    queries = max(degrees)
    long_part = int(np.argmax(degrees))

    # the last phase of each sequence meets a fresh ancilla and reduces to a scalar
    for part, sign, weight, angles in branches:
        condition = {part_bit: part, sign_bit: int(sign < 0)}
        apply_phase(state, weight * np.exp(1j * angles[-1]), condition)

    for step in range(queries, 0, -1):
        active = [b for b in branches if sequences[b[0]].degree >= step]
        controls = {part_bit: long_part} if len(active) < len(branches) else None
        if controls:
            charge_fanout(ledger.topology, ledger, 1, "control fan-out")
        apply_dbe(state, be, ledger, controls)
        for part, sign, _, angles in active:
            condition = {part_bit: part, sign_bit: int(sign < 0)}
            _phase_operator(state, be, condition, angles[step - 1])
        charge_fanout(ledger.topology, ledger, 1, "d-RO")
        logging.debug(f"QSP walk call {queries - step + 1}/{queries}")

    hadamard(state, (part_bit, sign_bit))
    return queries


def _phase_operator(state: StateVector, be: BlockEncoding, condition: Dict[int, int], phi: float):
    """(2 Pi - I) e^{i phi (2 Pi - I)}: e^{i phi} on the all-zero ancillas, -e^{-i phi} elsewhere"""
    apply_phase(state, -np.exp(-1j * phi), condition)
    apply_phase(state, -np.exp(2j * phi), {**condition, **value_controls(state.layout, be.ancilla_names, 0)})


def run_dqsp(
    h: OperatorSum,
    partition: QubitPartition,
    t: float,
    epsilon: float,
    network: Optional[NetworkTopology] = None,
    input_state: Optional[np.ndarray] = None,
    phase_file: Optional[str] = None,
    tol: float = 1e-10,
) -> RunResult:
    ch = cluster(h, partition)
    network = network or star(partition.gamma)
    if network.gamma != partition.gamma:
        raise TopologyError(f"Partition has {partition.gamma} nodes but the network has {network.gamma}")
    ledger = CommLedger(network)
    exact = exact_evolution(flatten(ch), t)
    tau = ch.alpha * t
    metadata = {"convention": CONVENTION, "tau": tau}

    if tau == 0:
        initial = system_input(ch.qubit_count, 0, input_state)
        state, probability, queries = initial.copy(), 1.0, 0
    else:
        be = block_encoding(ch)
        series, sequences = _phases_for(tau, epsilon, tol, phase_file)
        registers = be.registers() + (Register(BRANCH, 2, "control"),)
        initial = system_input(ch.qubit_count, sum(r.width for r in registers), input_state)
        work = extend(initial.copy(), registers)
        logging.info(f"d-QSP tau={tau:.6g} q={series.q} on {ch.qubit_count} qubits, {ch.gamma} nodes")
        queries = apply_qsp_sequences(work, be, sequences, ledger)
        total = work.norm() ** 2
        state = discard(work, [r.name for r in registers])
        probability = state.norm() ** 2 / total
        if probability < 1e-14:
            raise PostSelectionError(f"QSP branch post-selection probability {probability:.3e}")
        state.amplitudes *= 4
        metadata.update(q=series.q, degrees=[s.degree for s in sequences], phase_error=max(s.error for s in sequences))

    output, error, kind = compare_with_exact(state, exact, initial)
    predicted, formula = predicted_cost_dqsp(ch, t, epsilon)
    result = RunResult(
        protocol="dqsp",
        output=output,
        error=error,
        error_kind=kind,
        report=ledger_report(ledger),
        predicted_cost=predicted,
        prediction_formula=formula,
        steps=queries,
        gamma=ch.gamma,
        qubits=ch.qubit_count,
        edges=ch.num_edges,
        t=t,
        epsilon=epsilon,
        success_probability=float(probability),
        metadata=metadata,
    )
    logging.info(f"d-QSP finished: {queries} queries, {kind} error {error:.3e}")
    return result


def _phases_for(tau: float, epsilon: float, tol: float, phase_file: Optional[str]):
    if phase_file and os.path.exists(phase_file):
        series, sequences = load_phases(phase_file, tol)
        if abs(series.tau - tau) < 1e-12 and series.epsilon == epsilon:
            logging.info(f"Phases loaded from {phase_file}")
            return series, sequences
        logging.warning(f"{phase_file} holds phases for tau={series.tau}, recomputing for tau={tau}")
    series = jacobi_anger_truncation(tau, epsilon)
    sequences = simulation_phases(series, tol)
    if phase_file:
        save_phases(phase_file, series, sequences)
    return series, sequences
