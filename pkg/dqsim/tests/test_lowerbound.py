import itertools
import math

import numpy as np
import pytest

from dqsim.errors import DomainError, ShapeError
from dqsim.lowerbound import (
    IpInstance,
    circuit_output,
    circuit_to_hamiltonian,
    fidelity,
    gate_matrix,
    ip_circuit,
    ip_qubit_count,
    ip_via_dynamics,
    random_gate_list,
    run_pst,
)
from dqsim.statevector import gate, random_state


def test_couplings():
    ch = circuit_to_hamiltonian([np.eye(2)] * 3, 1)
    np.testing.assert_allclose(ch.couplings, [math.sqrt(3), 2, math.sqrt(3)])
    assert ch.clock_width == 2
    np.testing.assert_allclose(ch.matrix, ch.matrix.conj().T)


def test_perfect_state_transfer():
    rng = np.random.default_rng(14)
    for steps in (1, 2, 3, 5):
        ch = circuit_to_hamiltonian(random_gate_list(rng, steps), 1)
        psi0 = random_state(rng, 1)
        probability, out = run_pst(ch, psi0)
        assert probability == pytest.approx(1.0, abs=1e-10)
        assert fidelity(out, circuit_output(ch, psi0)) == pytest.approx(1.0, abs=1e-10)


def test_half_time_does_not_transfer():
    rng = np.random.default_rng(15)
    ch = circuit_to_hamiltonian(random_gate_list(rng, 3), 1)
    probability, _ = run_pst(ch, random_state(rng, 1), t=math.pi / 4)
    assert probability < 0.5


def test_gate_specs():
    np.testing.assert_allclose(gate_matrix(gate("X", 0), 1), [[0, 1], [1, 0]])
    with pytest.raises(ShapeError):
        gate_matrix(np.eye(4), 1)
    with pytest.raises(DomainError):
        circuit_to_hamiltonian([], 1)
    with pytest.raises(ShapeError):
        run_pst(circuit_to_hamiltonian([np.eye(2)], 1), np.ones(4))


def test_inner_product_value():
    assert IpInstance(("11", "10")).value == 1
    assert IpInstance(("11", "11")).value == 0
    assert IpInstance(("101", "111", "001")).value == 1
    with pytest.raises(DomainError):
        IpInstance(("1",))
    with pytest.raises(ShapeError):
        IpInstance(("10", "1"))
    with pytest.raises(ShapeError):
        IpInstance(("12", "01"))


@pytest.mark.parametrize("gamma,n", [(2, 2), (2, 3), (3, 2)])
def test_inner_product_via_dynamics(gamma, n):
    for bits in itertools.product("01", repeat=gamma * n):
        inst = IpInstance(tuple("".join(bits[g * n : (g + 1) * n]) for g in range(gamma)))
        assert ip_via_dynamics(inst) == inst.value


def test_ip_qubit_count():
    assert ip_qubit_count(2) == 2 + 4 + 1
    assert ip_qubit_count(3, gamma=3) == 2 + 9 + 1


def test_ip_circuit_gates():
    gates = ip_circuit(IpInstance(("101", "111")))
    assert len(gates) == 3
    assert ip_circuit(IpInstance(("10", "01", "11"))) == ip_circuit(IpInstance(("00", "00", "00")))
