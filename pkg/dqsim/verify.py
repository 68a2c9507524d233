"""
Verification suites. Each suite runs small exact instances and returns one row per check with the
measured value, the expected value and whether it passed.
"""
import itertools
import logging
import math
from typing import Callable, Dict, List

import numpy as np
import pandas as pd
import scipy.stats

from dqsim.apps import GroverInstance, grover_probability, run_dgrover, run_dqpe
from dqsim.dpf import commutator_norm_for_order, run_dpf
from dqsim.dts import LN2, run_dts, truncation_order
from dqsim.errors import ConfigError
from dqsim.lcu import DIRECT, STRICT, ReflectionSpec, balance_to_s2, dbe_block, dro_apply, lcu_apply, register_width
from dqsim.lowerbound import (
    IpInstance,
    circuit_output,
    circuit_to_hamiltonian,
    fidelity,
    ip_via_dynamics,
    random_gate_list,
    run_pst,
)
from dqsim.pauli import cluster, contiguous_partition, dense_matrix, flatten, parse_pauli_sum, random_operator_sum
from dqsim.qnet import CommLedger, chain, charge_fanout, star
from dqsim.qsp import jacobi_anger_truncation, run_dqsp
from dqsim.statevector import Register, RegisterLayout, product_state, random_state

COLUMNS = ["suite", "check", "value", "expected", "passed"]
SEED = 20240917
GROVER_16_3 = math.sin(7 * math.asin(0.25)) ** 2


def _close(suite: str, check: str, value: float, expected: float, tol: float = 1e-9) -> dict:
    passed = abs(value - expected) <= tol
    return {"suite": suite, "check": check, "value": value, "expected": expected, "passed": passed}


def _at_most(suite: str, check: str, value: float, bound: float) -> dict:
    return {"suite": suite, "check": check, "value": value, "expected": bound, "passed": value <= bound}


def _at_least(suite: str, check: str, value: float, bound: float) -> dict:
    return {"suite": suite, "check": check, "value": value, "expected": bound, "passed": value >= bound}


def verify_dbe() -> List[dict]:
    rng = np.random.default_rng(SEED)
    rows = []
    for i in range(5):
        gamma = int(rng.integers(2, 4))
        qubits = int(rng.integers(gamma, 6))
        ch = cluster(random_operator_sum(rng, qubits, 4), contiguous_partition(qubits, gamma))
        network = star(gamma)
        block, ledger = dbe_block(ch, network, CommLedger(network))
        target = dense_matrix(flatten(ch)) / ch.alpha
        rows.append(_close("dbe", f"block {i} equals H/alpha", float(np.max(np.abs(block - target))), 0.0))
        w = register_width(ch.num_edges + gamma)
        rows.append(_close("dbe", f"block {i} qubits charged", ledger.qubits_teleported, 2 * gamma * w, 0))
        rows.append(_close("dbe", f"block {i} classical bits", ledger.classical_bits, 4 * gamma * w, 0))
    return rows


def _reflection_input(rng: np.random.Generator):
    lay = RegisterLayout((Register("Q1", 1, 1), Register("Q2", 1, 2)))
    return product_state(lay, {"Q1": random_state(rng, 1), "Q2": random_state(rng, 1)})


def verify_dro() -> List[dict]:
    rng = np.random.default_rng(SEED)
    rows = []
    for phi in (math.pi / 2, math.pi / 3, math.pi / 7):
        state = _reflection_input(rng)
        network = star(2)
        strict, probability = dro_apply(
            ReflectionSpec(phi, ("Q1", "Q2"), STRICT), state.copy(), network, CommLedger(network)
        )
        direct, _ = dro_apply(ReflectionSpec(phi, ("Q1", "Q2"), DIRECT), state.copy(), network, CommLedger(network))
        expected = 1 / (1 + 2 * math.sin(phi / 2)) ** 2
        rows.append(_close("dro", f"phi={phi:.4f} success probability", probability, expected, 1e-9))
        distance = float(np.abs(strict.vector - direct.vector).max())
        rows.append(_close("dro", f"phi={phi:.4f} strict equals direct", distance, 0.0))
    return rows


def verify_oaa() -> List[dict]:
    rng = np.random.default_rng(SEED)
    rows = []
    for i in range(3):
        partition = contiguous_partition(2, 2)
        unitaries = [scipy.stats.unitary_group.rvs(2, random_state=rng) for _ in range(2)]
        decomp = balance_to_s2(unitaries, partition)
        psi = random_state(rng, 2)
        state = product_state(RegisterLayout((Register("sys", 2, None),)), {"sys": psi})
        network = star(2)
        out, probability = lcu_apply(decomp, state, CommLedger(network))
        expected = np.kron(unitaries[0], unitaries[1]) @ psi
        rows.append(_close("oaa", f"instance {i} success probability", probability, 1.0))
        rows.append(_close("oaa", f"instance {i} output", float(np.abs(out.vector - expected).max()), 0.0))
    return rows


def verify_dpf() -> List[dict]:
    h = parse_pauli_sum("1.0 XXI\n1.0 IZZ")
    partition = contiguous_partition(3, 2)
    alpha_comm = commutator_norm_for_order(cluster(h, partition), 1)
    rows = []
    for r in (4, 8, 16):
        result = run_dpf(h, partition, 0.5, p=1, r=r)
        bound = 2 * alpha_comm * 0.5**2 / (2 * r)
        rows.append(_at_most("dpf", f"r={r} error within first-order bound", result.error, bound))
        rows.append(_close("dpf", f"r={r} qubits charged", result.report.qubits_teleported, 8 * r, 0))
    for p, stages in ((2, 2), (4, 10)):
        result = run_dpf(h, partition, 0.5, p=p, r=2)
        rows.append(_close("dpf", f"p={p} stages", result.metadata["stages"], stages, 0))
        rows.append(_close("dpf", f"p={p} qubits charged", result.report.qubits_teleported, 2 * stages * 8, 0))
    return rows


def verify_dts() -> List[dict]:
    rows = [_close("dts", "K for per-segment budget 1e-4", truncation_order(LN2, 1.0, 2e-4), 6, 0)]
    h = parse_pauli_sum("0.6 XZ\n0.4 ZI\n0.3 IX")
    partition = contiguous_partition(2, 2)
    ch = cluster(h, partition)
    gamma, w = ch.gamma, register_width(ch.num_edges + ch.gamma)
    for K in (1, 2):
        result = run_dts(h, partition, LN2 / ch.alpha, K=K)
        expected = 3 * K * (2 * gamma * w + gamma) + 2 * gamma
        rows.append(_close("dts", f"K={K} one segment qubits charged", result.report.qubits_teleported, expected, 0))
        rows.append(_at_most("dts", f"K={K} error within segment bound", result.error, result.metadata["error_bound"]))
    result = run_dts(h, partition, 1.0, K=2)
    rows.append(_at_most("dts", "two segment run error", result.error, result.metadata["error_bound"]))
    return rows


def verify_dqsp() -> List[dict]:
    series = jacobi_anger_truncation(1.0, 1e-3)
    rows = [
        _close("dqsp", "q for tau=1, eps=1e-3", series.q, 5, 0),
        _close("dqsp", "J_0(1)", float(series.bessel[0]), 0.7651976866, 1e-10),
    ]
    h = parse_pauli_sum("0.5 XZ\n0.3 ZI\n0.2 IY")
    result = run_dqsp(h, contiguous_partition(2, 2), 2.0, 1e-3)
    rows.append(_at_most("dqsp", "simulation error", result.error, 1e-3))
    gamma, w = 2, register_width(result.edges + 2)
    expected = result.steps * (2 * gamma * w + gamma) + gamma
    rows.append(_close("dqsp", "qubits charged", result.report.qubits_teleported, expected, 0))
    return rows


def verify_pst() -> List[dict]:
    rng = np.random.default_rng(SEED)
    rows = []
    for steps in (1, 2, 3, 5):
        ch = circuit_to_hamiltonian(random_gate_list(rng, steps), 1)
        psi0 = random_state(rng, 1)
        probability, out = run_pst(ch, psi0)
        rows.append(_close("pst", f"N={steps} transfer probability", probability, 1.0))
        rows.append(_close("pst", f"N={steps} output fidelity", fidelity(out, circuit_output(ch, psi0)), 1.0))
    ch = circuit_to_hamiltonian(random_gate_list(rng, 3), 1)
    for j, (value, expected) in enumerate(zip(ch.couplings, (math.sqrt(3), 2, math.sqrt(3))), start=1):
        rows.append(_close("pst", f"N=3 coupling {j}", float(value), expected, 1e-12))
    return rows


def verify_ip() -> List[dict]:
    rows = []
    for gamma, n in ((2, 3), (3, 2)):
        failures = 0
        for bits in itertools.product("01", repeat=gamma * n):
            inst = IpInstance(tuple("".join(bits[g * n : (g + 1) * n]) for g in range(gamma)))
            failures += ip_via_dynamics(inst) != inst.value
        rows.append(_close("ip", f"gamma={gamma} n={n} wrong answers", failures, 0, 0))
    return rows


def verify_qnet() -> List[dict]:
    rows = []
    for gamma, width in ((2, 1), (4, 2), (5, 3)):
        star_cost = charge_fanout(star(gamma), CommLedger(star(gamma)), width)
        chain_cost = charge_fanout(chain(gamma), CommLedger(chain(gamma)), width)
        rows.append(_close("qnet", f"star gamma={gamma} w={width}", star_cost, gamma * width, 0))
        rows.append(_close("qnet", f"chain gamma={gamma} w={width}", chain_cost, (gamma - 1) * width, 0))
    return rows


def verify_apps() -> List[dict]:
    partition = contiguous_partition(2, 2)
    rows = []
    for phase, top, floor in ((5 / 8, "101", 1.0 - 1e-9), (1 / 3, "011", 0.405)):
        gate = np.diag([1.0, np.exp(2j * np.pi * phase)])
        decomp = balance_to_s2([gate, np.eye(2)], partition)
        estimate = run_dqpe(decomp, np.array([0, 0, 1, 0]), 3)
        rows.append(_close("apps", f"QPE phase {phase:.4f} top outcome", int(estimate.top_bits == top), 1, 0))
        rows.append(_at_least("apps", f"QPE phase {phase:.4f} top probability", estimate.probability, floor))
    for gamma, iterations, expected in ((2, 3, GROVER_16_3), (1, 1, 1.0)):
        inst = GroverInstance(gamma, 2, 3, iterations)
        result = run_dgrover(inst)
        rows.append(_close("apps", f"Grover N={inst.size} success", result.success_probability, expected, 1e-6))
        closed_form = grover_probability(inst.size, iterations)
        rows.append(_close("apps", f"Grover N={inst.size} closed form", closed_form, expected, 1e-6))
    return rows


SUITES: Dict[str, Callable[[], List[dict]]] = {
    "dbe": verify_dbe,
    "dro": verify_dro,
    "oaa": verify_oaa,
    "dpf": verify_dpf,
    "dts": verify_dts,
    "dqsp": verify_dqsp,
    "pst": verify_pst,
    "ip": verify_ip,
    "qnet": verify_qnet,
    "apps": verify_apps,
}


def run_suite(name: str) -> pd.DataFrame:
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise ConfigError(f"Unknown verification suite '{name}', use one of {list(SUITES) + ['all']}")
    rows = []
    for suite in names:
        logging.info(f"Running verification suite {suite}")
        rows += SUITES[suite]()
    table = pd.DataFrame(rows, columns=COLUMNS)
    failed = int((~table["passed"]).sum())
    logging.info(f"{len(table) - failed}/{len(table)} checks passed")
    return table
