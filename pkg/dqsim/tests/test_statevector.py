import numpy as np
import pytest
import scipy.linalg

from dqsim.errors import CapabilityError, DomainError, PostSelectionError, ShapeError
from dqsim.pauli import PauliString, dense_matrix, parse_pauli_sum
from dqsim.statevector import (
    Register,
    StatePrep,
    allocate,
    apply_pauli_exponential,
    apply_unitary,
    as_operator,
    basis_batch,
    discard,
    dump_state,
    embed_operator,
    exact_evolution,
    extend,
    gate,
    hadamard,
    identity_batch,
    layout,
    load_state,
    matrix_gate,
    operator_distance,
    pauli_rotation,
    post_select,
    product_state,
    random_state,
    register_probabilities,
)


def test_layout_offsets():
    lay = layout(("sys", 3, None), ("anc", 2, "control"), ("flag", 1, 1))
    assert lay.total_qubits == 6
    assert lay.qubits("anc") == (3, 4)
    assert lay.qubits_of(["flag", "sys"]) == (5, 0, 1, 2)
    with pytest.raises(ShapeError, match="Duplicate"):
        layout(("a", 1, None), ("a", 1, None))
    with pytest.raises(ShapeError, match="Unknown register"):
        lay.qubits("missing")


def test_bell_state():
    state = allocate(layout(("q", 2, None)))
    hadamard(state, [0])
    apply_unitary(state, gate("CNOT", 0, 1))
    np.testing.assert_allclose(state.vector, np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-15)


def test_qubit_cap(monkeypatch):
    monkeypatch.setenv("DQSIM_QUBIT_CAP", "2")
    with pytest.raises(CapabilityError, match="DQSIM_QUBIT_CAP"):
        allocate(layout(("q", 3, None)))


def test_pauli_exponential_matches_expm():
    rng = np.random.default_rng(4)
    psi = random_state(rng, 3)
    state = product_state(layout(("q", 3, None)), {"q": psi})
    apply_pauli_exponential(state, 0.7, PauliString("XYZ"), 0.3)
    expected = scipy.linalg.expm(-1j * 0.21 * PauliString("XYZ").matrix()) @ psi
    np.testing.assert_allclose(state.vector, expected, atol=1e-12)


def test_controlled_pauli_exponential():
    rng = np.random.default_rng(5)
    psi = random_state(rng, 2)
    state = product_state(layout(("c", 1, None), ("q", 2, None)), {"c": np.array([0, 1]), "q": psi})
    apply_pauli_exponential(state, 1.0, PauliString("ZX"), 0.4, qubits=(1, 2), controls={0: 1})
    expected = scipy.linalg.expm(-0.4j * PauliString("ZX").matrix()) @ psi
    np.testing.assert_allclose(state.vector[4:], expected, atol=1e-12)
    np.testing.assert_allclose(state.vector[:4], 0.0, atol=1e-15)


def test_pauli_rotation_and_matrix_gate():
    state = allocate(layout(("q", 1, None)))
    apply_unitary(state, pauli_rotation("X", np.pi / 2))
    np.testing.assert_allclose(state.vector, [0, -1j], atol=1e-15)
    apply_unitary(state, matrix_gate(np.array([[0, 1], [1, 0]]), 0))
    np.testing.assert_allclose(state.vector, [-1j, 0], atol=1e-15)
    with pytest.raises(DomainError, match="not unitary"):
        matrix_gate(np.array([[1, 1], [0, 1]]), 0)
    with pytest.raises(DomainError, match="Unknown gate"):
        gate("T", 0)


def test_state_prep():
    rng = np.random.default_rng(6)
    a = random_state(rng, 2)
    a = a * np.exp(-1j * np.angle(a[0]))
    prep = StatePrep(a)
    assert prep.width == 2
    state = allocate(layout(("q", 2, None)))
    prep.apply(state, (0, 1))
    np.testing.assert_allclose(state.vector, a, atol=1e-12)
    np.testing.assert_allclose(prep.matrix() @ prep.matrix(), np.eye(4), atol=1e-12)
    with pytest.raises(DomainError, match="norm"):
        StatePrep(np.array([1.0, 1.0]))


def test_post_select():
    state = allocate(layout(("a", 1, None), ("b", 1, None)))
    hadamard(state, [0])
    selected, probability = post_select(state, "a", 1)
    assert probability == pytest.approx(0.5)
    np.testing.assert_allclose(selected.vector, [0, 0, 1, 0], atol=1e-15)
    with pytest.raises(PostSelectionError, match="reading 1"):
        post_select(state, "b", 1)


def test_extend_and_discard():
    rng = np.random.default_rng(7)
    psi = random_state(rng, 2)
    state = product_state(layout(("sys", 2, None)), {"sys": psi})
    bigger = extend(state, [Register("anc", 1, "control")])
    assert bigger.layout.names == ("sys", "anc")
    np.testing.assert_allclose(bigger.vector[::2], psi, atol=1e-15)
    back = discard(bigger, ["anc"])
    np.testing.assert_allclose(back.vector, psi, atol=1e-15)
    np.testing.assert_allclose(register_probabilities(bigger, "anc"), [1.0, 0.0], atol=1e-15)


def test_basis_batch_gives_operator():
    lay = layout(("q", 2, None))
    state = basis_batch(lay, "q")
    apply_unitary(state, gate("H", 1))
    np.testing.assert_allclose(as_operator(state), embed_operator(scipy.linalg.hadamard(2) / np.sqrt(2), [1], 2))
    ident = identity_batch(lay)
    apply_unitary(ident, gate("X", 0))
    np.testing.assert_allclose(as_operator(ident), np.kron([[0, 1], [1, 0]], np.eye(2)), atol=1e-15)


def test_exact_evolution():
    h = parse_pauli_sum("0.5 XZ\n0.3 ZI\n0.2 IY")
    u = exact_evolution(h, 1.3)
    np.testing.assert_allclose(u, scipy.linalg.expm(-1.3j * dense_matrix(h)), atol=1e-12)
    assert operator_distance(u, u) == 0.0
    with pytest.raises(ShapeError):
        operator_distance(u, np.eye(2))


def test_dump_and_load(tmp_path):
    rng = np.random.default_rng(8)
    state = product_state(layout(("q", 3, None)), {"q": random_state(rng, 3)})
    filename = str(tmp_path / "state.dqsv")
    dump_state(state, filename)
    loaded = load_state(filename)
    np.testing.assert_array_equal(loaded.vector, state.vector)
    assert loaded.layout.names == ("q",)
    with pytest.raises(ShapeError, match="Layout has 2 qubits, dump has 3"):
        load_state(filename, layout(("q", 2, None)))
    with pytest.raises(ShapeError, match="Layout has 4 qubits"):
        load_state(filename, layout(("q", 3, None), ("a", 1, None)))
    bad = tmp_path / "bad.dqsv"
    bad.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ShapeError, match="DQSV"):
        load_state(str(bad))
