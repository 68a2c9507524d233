import numpy as np
import pytest

from dqsim.errors import CapabilityError, DomainError, ParseError, PartitionError, ShapeError
from dqsim.pauli import (
    cluster,
    contiguous_partition,
    dense_matrix,
    flatten,
    from_records,
    induced_one_norm,
    nested_commutator_norm,
    one_norm,
    operator_sum,
    parse_pauli_sum,
    partition_from_nodes,
    random_operator_sum,
    spectral_norm,
)


def test_parse_single_term():
    h = parse_pauli_sum("1.0 X")
    assert h.qubit_count == 1
    assert len(h) == 1
    assert h.terms[0][0] == 1.0
    assert str(h.terms[0][1]) == "X"


def test_parse_merges_and_cancels():
    merged = parse_pauli_sum("0.5 XX\n0.5 XX")
    assert [(c, str(s)) for c, s in merged.terms] == [(1.0, "XX")]
    cancelled = parse_pauli_sum("0.5 XX\n-0.5 XX")
    assert cancelled.terms == ()
    assert cancelled.qubit_count == 2


def test_parse_skips_comments_and_blank_lines():
    h = parse_pauli_sum("# header\n\n0.25 ZI  # field\n0.75 IZ\n")
    assert len(h) == 2


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="Line 2") as info:
        parse_pauli_sum("1.0 XX\nabc XX")
    assert info.value.line_number == 2
    with pytest.raises(ParseError, match="Line 1"):
        parse_pauli_sum("1.0 XQ")
    with pytest.raises(ShapeError, match="differs"):
        parse_pauli_sum("1.0 XX\n1.0 XXX")


def test_text_round_trip():
    h = parse_pauli_sum("0.1 XYZ\n-2.5 ZZI\n0.3 IIX")
    assert parse_pauli_sum(h.to_text()) == h


def test_from_records():
    h = from_records([{"coeff": 0.5, "pauli": "xz"}, {"coeff": 1.0, "pauli": "ZZ"}])
    assert h == parse_pauli_sum("0.5 XZ\n1.0 ZZ")
    with pytest.raises(ShapeError):
        from_records([])


def test_one_norm():
    assert one_norm(parse_pauli_sum("0.5 XX\n-0.5 ZZ")) == 1.0
    assert one_norm(parse_pauli_sum("0.5 XX\n-0.5 XX")) == 0.0
    assert one_norm(parse_pauli_sum("2 ZZ")) == 2.0


def test_spectral_norm():
    assert spectral_norm(parse_pauli_sum("1 X")) == pytest.approx(1.0, rel=1e-10)
    assert spectral_norm(parse_pauli_sum("1 XX\n1 ZZ")) == pytest.approx(2.0, rel=1e-10)
    assert spectral_norm(parse_pauli_sum("1 XX\n-1 XX")) == 0.0


def test_spectral_norm_respects_dense_cap(monkeypatch):
    monkeypatch.setenv("DQSIM_DENSE_CAP", "2")
    with pytest.raises(CapabilityError, match="dense cap"):
        spectral_norm(parse_pauli_sum("1 XXX"))


def test_dense_matrix():
    np.testing.assert_array_equal(dense_matrix(parse_pauli_sum("1 Z")), np.diag([1, -1]))
    np.testing.assert_array_equal(dense_matrix(parse_pauli_sum("1 X")), [[0, 1], [1, 0]])
    m = dense_matrix(parse_pauli_sum("0.5 XX\n0.5 ZZ"))
    np.testing.assert_allclose(m, m.conj().T, atol=1e-14)
    assert abs(np.trace(m)) < 1e-14


def test_dense_matrix_is_linear():
    rng = np.random.default_rng(1)
    a = random_operator_sum(rng, 3, 5)
    b = random_operator_sum(rng, 3, 5)
    np.testing.assert_allclose(dense_matrix(a + b), dense_matrix(a) + dense_matrix(b), atol=1e-14)


def test_one_norm_bounds_spectral_norm():
    rng = np.random.default_rng(2)
    for _ in range(100):
        h = random_operator_sum(rng, int(rng.integers(1, 6)), int(rng.integers(1, 7)), max_weight=3)
        assert one_norm(h) >= spectral_norm(h) - 1e-12


def test_cluster_example():
    h = parse_pauli_sum("1 XXII\n1 IZZI\n1 IIXX")
    ch = cluster(h, partition_from_nodes([[0, 1], [2, 3]]))
    assert [str(s) for _, s in ch.locals[1].terms] == ["XXII"]
    assert [str(s) for _, s in ch.locals[2].terms] == ["IIXX"]
    assert ch.num_edges == 1
    assert str(ch.interactions[0].string) == "IZZI"
    assert ch.interactions[0].support_nodes == (1, 2)


def test_cluster_single_node_and_three_node_term():
    h = parse_pauli_sum("1 XXI\n0.5 ZZZ")
    single = cluster(h, contiguous_partition(3, 1))
    assert single.num_edges == 0
    assert single.locals[1] == h
    spread = cluster(parse_pauli_sum("1 ZZZ"), partition_from_nodes([[0], [1], [2]]))
    assert spread.interactions[0].support_nodes == (1, 2, 3)


def test_cluster_then_flatten_is_identity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        h = random_operator_sum(rng, 5, 8, max_weight=3)
        ch = cluster(h, contiguous_partition(5, int(rng.integers(1, 4))))
        assert flatten(ch) == h
        assert ch.alpha == pytest.approx(one_norm(h))


def test_partition_errors():
    with pytest.raises(PartitionError, match="Partition covers"):
        cluster(parse_pauli_sum("1 XX"), contiguous_partition(3, 1))
    with pytest.raises(PartitionError, match="no qubits"):
        partition_from_nodes([[0, 1], []])
    with pytest.raises(PartitionError, match="assigned to nodes"):
        partition_from_nodes([[0, 1], [1]])
    with pytest.raises(PartitionError):
        contiguous_partition(2, 3)


def test_nested_commutator_norm_examples():
    two_nodes = partition_from_nodes([[0], [1]])
    commuting = cluster(parse_pauli_sum("1 ZI\n1 ZZ"), two_nodes)
    assert nested_commutator_norm(commuting, 1).value == pytest.approx(0.0, abs=1e-12)
    anti = cluster(parse_pauli_sum("1 XI\n1 ZZ"), two_nodes)
    norm = nested_commutator_norm(anti, 1)
    assert norm.value == pytest.approx(4.0, rel=1e-10)
    assert not norm.upper_bound
    local = cluster(parse_pauli_sum("1 XI\n1 IZ"), two_nodes)
    assert nested_commutator_norm(local, 1).value == 0.0


def test_nested_commutator_norm_falls_back_to_bound(monkeypatch):
    monkeypatch.setenv("DQSIM_ENUMERATION_CAP", "2")
    ch = cluster(parse_pauli_sum("1 XI\n1 ZZ"), partition_from_nodes([[0], [1]]))
    norm = nested_commutator_norm(ch, 1)
    assert norm.upper_bound
    assert norm.value == pytest.approx(2 * 2.0**2)


def test_nested_commutator_norm_ignores_edge_order():
    part = partition_from_nodes([[0], [1], [2]])
    a = cluster(parse_pauli_sum("1 XII\n0.5 ZZI\n0.3 IYY\n0.2 XIX"), part)
    b = a.__class__(a.locals, tuple(reversed(a.interactions)), a.partition, a.qubit_count)
    for p in (1, 2):
        assert nested_commutator_norm(a, p).value == pytest.approx(nested_commutator_norm(b, p).value, rel=1e-12)
    with pytest.raises(DomainError):
        nested_commutator_norm(a, 3)


def test_induced_one_norm():
    assert induced_one_norm(parse_pauli_sum("1 ZZI"), 2) == pytest.approx(1.0)
    assert induced_one_norm(parse_pauli_sum("1 ZZI\n1 ZIZ"), 2) == pytest.approx(2.0)
    assert induced_one_norm(operator_sum([], 2), 2) == 0.0
    with pytest.raises(DomainError, match="locality"):
        induced_one_norm(parse_pauli_sum("1 ZZZ"), 2)
