import math

import numpy as np
import pytest

from dqsim.dts import (
    LN2,
    build_unary_operators,
    order_for_budget,
    predicted_cost_dts,
    run_dts,
    segment_plan,
    taylor_plan,
    taylor_tail,
    taylor_weight,
    truncation_order,
    unary_amplitudes,
)
from dqsim.errors import DomainError
from dqsim.lcu import SYSTEM, register_width
from dqsim.pauli import cluster, contiguous_partition, parse_pauli_sum
from dqsim.qnet import CommLedger, chain, star
from dqsim.statevector import Register, RegisterLayout, StateVector, random_state

H = parse_pauli_sum("0.6 XZ\n0.4 ZI\n0.3 IX")
PARTITION = contiguous_partition(2, 2)
ALPHA = 1.3


def test_taylor_tail_and_weight():
    assert taylor_tail(LN2, 6) < 1e-4 < taylor_tail(LN2, 5)
    assert taylor_weight(LN2, 40) == pytest.approx(2.0)
    assert taylor_weight(LN2, 3) + taylor_tail(LN2, 3) == pytest.approx(2.0)


def test_truncation_order():
    assert truncation_order(LN2, 1.0, 2e-4) == 6
    assert order_for_budget(1e-4) == 6
    assert truncation_order(1.0, 10.0, 1e-3) >= truncation_order(1.0, 1.0, 1e-3)
    with pytest.raises(DomainError):
        truncation_order(1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        order_for_budget(-1.0)


def test_segment_plan():
    assert segment_plan(1.0, 3 * LN2) == (3, LN2)
    assert segment_plan(0.0, 1.0) == (0, 0.0)
    assert segment_plan(2.0, 0.0) == (0, 0.0)
    plan = taylor_plan(1.0, 1.0, K=4)
    assert plan.r == 2
    assert plan.residual_time == pytest.approx(1.0 - LN2)
    assert plan.has_residual
    assert not taylor_plan(1.0, LN2, K=4).has_residual
    with pytest.raises(DomainError, match="truncation order K or an error target"):
        taylor_plan(1.0, 1.0)


def test_unary_amplitudes():
    x = 0.5
    a = unary_amplitudes(x, 2)
    expected = np.zeros(4)
    expected[[0b00, 0b10, 0b11]] = np.sqrt([1.0, x, x**2 / 2])
    np.testing.assert_allclose(a, expected / np.linalg.norm(expected), atol=1e-15)
    with pytest.raises(DomainError, match="K >= 1"):
        build_unary_operators(cluster(H, PARTITION), 0)


def test_one_segment_ledger_identity():
    gamma = 2
    w = register_width(1 + gamma)
    for K in (1, 2):
        result = run_dts(H, PARTITION, LN2 / ALPHA, K=K)
        assert result.steps == 1
        assert result.report.qubits_teleported == 3 * K * (2 * gamma * w + gamma) + 2 * gamma
        assert result.error <= result.metadata["error_bound"]
        assert result.success_probability == 1.0


def test_error_shrinks_with_order():
    first = run_dts(H, PARTITION, LN2 / ALPHA, K=1)
    second = run_dts(H, PARTITION, LN2 / ALPHA, K=2)
    assert second.error < first.error


def test_residual_segment_is_post_selected():
    gamma = 2
    w = register_width(1 + gamma)
    result = run_dts(H, PARTITION, 1.0, K=2)
    assert result.steps == math.ceil(ALPHA / LN2)
    assert 0.0 < result.success_probability < 1.0
    assert result.error <= result.metadata["error_bound"]
    segment = 3 * 2 * (2 * gamma * w + gamma) + 2 * gamma
    residual = 2 * (2 * gamma * w + gamma)
    assert result.report.qubits_teleported == segment + residual


def test_zero_time_is_identity():
    result = run_dts(H, PARTITION, 0.0, K=2)
    assert result.steps == 0
    assert result.report.qubits_teleported == 0
    assert result.error == pytest.approx(0.0, abs=1e-14)


def test_chain_network_and_epsilon_mode():
    result = run_dts(H, PARTITION, LN2 / ALPHA, K=1, network=chain(2))
    star_result = run_dts(H, PARTITION, LN2 / ALPHA, K=1)
    assert result.report.qubits_teleported < star_result.report.qubits_teleported
    np.testing.assert_allclose(result.output, star_result.output, atol=1e-12)
    with pytest.raises(DomainError):
        run_dts(H, PARTITION, 1.0)


def test_predicted_cost():
    ch = cluster(H, PARTITION)
    value, _ = predicted_cost_dts(ch, 1.0, 1e-3)
    assert value == pytest.approx(ALPHA * 2 * 2 * truncation_order(ALPHA, 1.0, 1e-3))


def _random_vector(rng: np.random.Generator, lay: RegisterLayout) -> StateVector:
    return StateVector(random_state(rng, lay.total_qubits).reshape((2,) * lay.total_qubits), lay)


@pytest.mark.parametrize("K", [2, 3])
def test_walk_adjoint(K):
    ops = build_unary_operators(cluster(parse_pauli_sum("0.6 XI\n0.4 ZI\n0.3 IX"), PARTITION), K)
    lay = RegisterLayout((Register(SYSTEM, 2, None),) + ops.registers())
    rng = np.random.default_rng(K)
    x, y = _random_vector(rng, lay), _random_vector(rng, lay)
    wx = ops.walk(x.copy(), CommLedger(star(2))).vector
    w_dagger_y = ops.walk(y.copy(), CommLedger(star(2)), adjoint=True).vector
    assert np.vdot(x.vector, w_dagger_y) == pytest.approx(np.vdot(wx, y.vector), abs=1e-12)
    back = ops.walk(ops.walk(x.copy(), CommLedger(star(2))), CommLedger(star(2)), adjoint=True)
    np.testing.assert_allclose(back.vector, x.vector, atol=1e-12)
