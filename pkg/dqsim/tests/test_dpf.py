import numpy as np
import pytest

from dqsim.dpf import (
    ANCILLA,
    commutator_norm_for_order,
    interaction_exponential,
    predicted_cost_dpf,
    required_steps,
    run_dpf,
    segment_plan,
    steps_from_norm,
    suzuki_schedule,
    trotter_operator,
)
from dqsim.errors import DomainError, MisuseError, TopologyError
from dqsim.pauli import cluster, contiguous_partition, dense_matrix, flatten, parse_pauli_sum
from dqsim.qnet import CommLedger, chain, star
from dqsim.results import OPERATOR, STATE
from dqsim.statevector import allocate, exact_evolution, layout, operator_distance

H = parse_pauli_sum("1.0 XXI\n1.0 IZZ")
PARTITION = contiguous_partition(3, 2)


def test_suzuki_schedule_stages():
    assert [suzuki_schedule(p).stages for p in (1, 2, 4)] == [1, 2, 10]
    for p in (1, 2, 4, 6):
        assert sum(suzuki_schedule(p).stage_coefficients) == pytest.approx(1.0)
    assert suzuki_schedule(2).permutation(1, 3) == [2, 1, 0]
    with pytest.raises(DomainError, match="order 3"):
        suzuki_schedule(3)


def test_first_order_trotter_operator():
    ch = cluster(H, PARTITION)
    u = trotter_operator(ch, suzuki_schedule(1), 0.4, 1)
    h0, he = (dense_matrix(s) for s in ch.summands())
    np.testing.assert_allclose(u, exact_evolution(he, 0.4) @ exact_evolution(h0, 0.4), atol=1e-12)


def test_ledger_per_interaction_exponential():
    for r in (1, 4, 8):
        result = run_dpf(H, PARTITION, 0.5, p=1, r=r)
        assert result.report.qubits_teleported == 8 * r
        assert result.report.classical_bits == 16 * r
    result = run_dpf(H, PARTITION, 0.5, p=2, r=3)
    assert result.report.qubits_teleported == 3 * 2 * 8


def test_three_node_term_charges_every_support_node():
    h = parse_pauli_sum("0.3 XYZ")
    result = run_dpf(h, contiguous_partition(3, 3), 0.7, p=1, r=1)
    assert result.report.qubits_teleported == 4 * 3
    assert result.error == pytest.approx(0.0, abs=1e-12)


def test_chain_network_keeps_ancilla_on_first_support_node():
    result = run_dpf(H, PARTITION, 0.5, p=1, r=4, network=chain(2))
    assert result.report.qubits_teleported == 4 * 4
    with pytest.raises(TopologyError):
        run_dpf(H, PARTITION, 0.5, r=1, network=star(3))


def test_first_order_error_bound_and_convergence():
    alpha_comm = commutator_norm_for_order(cluster(H, PARTITION), 1)
    errors = []
    for r in (4, 8, 16):
        result = run_dpf(H, PARTITION, 0.5, p=1, r=r)
        assert result.error_kind == OPERATOR
        assert result.error <= 2 * alpha_comm * 0.5**2 / (2 * r)
        errors.append(result.error)
    assert errors[0] > errors[1] > errors[2]
    assert errors[0] / errors[2] == pytest.approx(4.0, rel=0.15)


def test_higher_order_is_more_accurate():
    first = run_dpf(H, PARTITION, 1.0, p=1, r=4)
    second = run_dpf(H, PARTITION, 1.0, p=2, r=4)
    fourth = run_dpf(H, PARTITION, 1.0, p=4, r=4)
    assert fourth.error < second.error < first.error
    assert fourth.metadata == {"order": 4, "stages": 10}


def test_no_interactions_is_free_and_exact():
    result = run_dpf(parse_pauli_sum("0.5 XZI\n0.2 IIY"), PARTITION, 2.0, r=1)
    assert result.edges == 0
    assert result.report.qubits_teleported == 0
    assert result.error == pytest.approx(0.0, abs=1e-12)


def test_state_input():
    psi = np.zeros(8)
    psi[5] = 1.0
    result = run_dpf(H, PARTITION, 0.5, r=8, input_state=psi)
    assert result.error_kind == STATE
    assert result.output.shape == (8,)
    np.testing.assert_allclose(np.linalg.norm(result.output), 1.0)


def test_required_steps_formula():
    ch = cluster(H, PARTITION)
    alpha_comm = commutator_norm_for_order(ch, 1)
    r = required_steps(ch, 1, 0.5, 1e-2)
    assert r == steps_from_norm(alpha_comm, 1, 0.5, 1e-2)
    assert steps_from_norm(0.0, 1, 1.0, 1e-3) == 1
    with pytest.raises(DomainError, match="positive"):
        steps_from_norm(1.0, 1, 1.0, 0.0)


def test_required_steps_empirical_is_minimal():
    ch = cluster(H, PARTITION)
    exact = exact_evolution(flatten(ch), 0.5)
    r = required_steps(ch, 1, 0.5, 1e-2, mode="empirical")
    assert operator_distance(trotter_operator(ch, suzuki_schedule(1), 0.5, r), exact) <= 1e-2
    assert operator_distance(trotter_operator(ch, suzuki_schedule(1), 0.5, r - 1), exact) > 1e-2
    assert r <= required_steps(ch, 1, 0.5, 1e-2)
    with pytest.raises(DomainError, match="step mode"):
        required_steps(ch, 1, 0.5, 1e-2, mode="guess")


def test_run_needs_steps_or_target():
    with pytest.raises(DomainError, match="epsilon"):
        run_dpf(H, PARTITION, 0.5)
    result = run_dpf(H, PARTITION, 0.5, epsilon=1e-2)
    assert result.error <= 1e-2
    assert result.predicted_cost > 0


def test_interaction_exponential_rejects_local_terms():
    ch = cluster(parse_pauli_sum("1 XXI\n1 IZZ"), PARTITION)
    local = ch.interactions[0]._replace(support_nodes=(1,))
    state = allocate(layout(("sys", 3, None), (ANCILLA, 1, "control")))
    with pytest.raises(MisuseError, match="single node"):
        interaction_exponential(state, local, 0.1, PARTITION, CommLedger(star(2)))


def test_predicted_cost():
    ch = cluster(parse_pauli_sum("1.0 XXI\n1.0 IZZ"), contiguous_partition(3, 2))
    value, formula = predicted_cost_dpf(ch, 1, 0.5, 1e-2)
    assert value == pytest.approx(1 * 2 * 4.0 * 0.5**2 / 1e-2)
    assert "unit constant" in formula


def test_non_positive_steps_and_targets():
    with pytest.raises(DomainError, match="step count"):
        segment_plan(suzuki_schedule(1), 0.5, 0)
    ch = cluster(parse_pauli_sum("1.0 XXI\n1.0 IZZ"), contiguous_partition(3, 2))
    with pytest.raises(DomainError, match="positive"):
        predicted_cost_dpf(ch, 1, 0.5, 0.0)
