import json

import numpy as np
import pytest
from numpy.polynomial import chebyshev

from dqsim.errors import DomainError, PhaseSynthesisError
from dqsim.lcu import block_encoding, register_width
from dqsim.pauli import cluster, contiguous_partition, dense_matrix, flatten, parse_pauli_sum
from dqsim.qsp import (
    chebyshev_grid,
    jacobi_anger_truncation,
    load_phases,
    predicted_cost_dqsp,
    qubitized_walk,
    run_dqsp,
    save_phases,
    simulation_phases,
    solve_phases,
)

H = parse_pauli_sum("0.5 XZ\n0.3 ZI\n0.2 IY")
PARTITION = contiguous_partition(2, 2)


def test_jacobi_anger_truncation():
    series = jacobi_anger_truncation(1.0, 1e-3)
    assert series.q == 5
    assert series.bessel[0] == pytest.approx(0.7651976866, abs=1e-10)
    x = np.linspace(-1, 1, 101)
    assert np.max(np.abs(chebyshev.chebval(x, series.cos_chebyshev()) - np.cos(x))) <= 1e-3
    assert np.max(np.abs(chebyshev.chebval(x, series.sin_chebyshev()) - np.sin(x))) <= 1e-3
    assert jacobi_anger_truncation(10.0, 1e-3).q > series.q
    with pytest.raises(DomainError):
        jacobi_anger_truncation(0.0, 1e-3)


def test_solve_phases_closed_forms():
    constant = solve_phases([0.5])
    assert constant.degree == 0
    np.testing.assert_allclose(constant.response(np.array([0.2, 0.9])).real, 0.5, atol=1e-12)
    linear = solve_phases([0.0, 0.4])
    np.testing.assert_allclose(linear.response(np.array([-0.5, 0.5])).real, [-0.2, 0.2], atol=1e-12)


def test_solve_phases_rejects_bad_targets():
    with pytest.raises(DomainError, match="parity"):
        solve_phases([0.1, 0.1])
    with pytest.raises(DomainError, match="below 1"):
        solve_phases([0.0, 1.0])
    with pytest.raises(DomainError, match="below 1"):
        solve_phases([0.0, 0.0, 0.0, 1.0])


def test_simulation_phases_match_targets():
    series = jacobi_anger_truncation(1.0, 1e-3)
    cos_seq, sin_seq = simulation_phases(series)
    assert (cos_seq.parity, sin_seq.parity) == (0, 1)
    grid = chebyshev_grid(64)
    cos_target = chebyshev.chebval(grid, series.cos_chebyshev() / 2)
    sin_target = chebyshev.chebval(grid, series.sin_chebyshev() / 2)
    np.testing.assert_allclose(cos_seq.response(grid).real, cos_target, atol=1e-9)
    np.testing.assert_allclose(sin_seq.response(grid).real, sin_target, atol=1e-9)


def test_phase_sidecar(tmp_path):
    series = jacobi_anger_truncation(0.5, 1e-4)
    sequences = simulation_phases(series)
    filename = str(tmp_path / "phases.json")
    save_phases(filename, series, sequences)
    loaded_series, loaded = load_phases(filename)
    assert loaded_series.q == series.q
    for a, b in zip(sequences, loaded):
        np.testing.assert_allclose(a.angles, b.angles)

    with open(filename) as f:
        doc = json.load(f)
    doc["sequences"][0]["angles"][0] += 0.3
    with open(filename, "w") as f:
        json.dump(doc, f)
    with pytest.raises(PhaseSynthesisError, match="cos phases miss") as info:
        load_phases(filename)
    assert info.value.residual > 1e-3


def test_run_dqsp_error_and_ledger():
    result = run_dqsp(H, PARTITION, 2.0, 1e-3)
    assert result.error <= 1e-3
    gamma, w = 2, register_width(result.edges + 2)
    assert result.report.qubits_teleported == result.steps * (2 * gamma * w + gamma) + gamma
    assert result.metadata["q"] == jacobi_anger_truncation(2.0, 1e-3).q
    assert 0 < result.success_probability <= 1


def test_run_dqsp_reuses_phase_file(tmp_path):
    filename = str(tmp_path / "phases.json")
    first = run_dqsp(H, PARTITION, 1.0, 1e-3, phase_file=filename)
    assert (tmp_path / "phases.json").exists()
    second = run_dqsp(H, PARTITION, 1.0, 1e-3, phase_file=filename)
    np.testing.assert_allclose(first.output, second.output, atol=1e-12)
    assert first.report == second.report


def test_run_dqsp_zero_time():
    result = run_dqsp(H, PARTITION, 0.0, 1e-3)
    assert result.steps == 0
    assert result.report.qubits_teleported == 0
    assert result.error == pytest.approx(0.0, abs=1e-14)


def test_qubitized_walk():
    ch = cluster(H, PARTITION)
    be = block_encoding(ch)
    walk = qubitized_walk(be)
    np.testing.assert_allclose(walk @ walk.conj().T, np.eye(walk.shape[0]), atol=1e-10)
    stride = 2**be.ancilla_qubits
    np.testing.assert_allclose(walk[::stride, ::stride], dense_matrix(flatten(ch)) / ch.alpha, atol=1e-10)
    eigenvalues = np.linalg.eigvals(walk)
    for lam in np.linalg.eigvalsh(dense_matrix(flatten(ch))):
        for sign in (1, -1):
            target = np.exp(sign * 1j * np.arccos(lam / ch.alpha))
            assert np.min(np.abs(eigenvalues - target)) < 1e-9


def test_predicted_cost():
    value, formula = predicted_cost_dqsp(cluster(H, PARTITION), 2.0, 1e-3)
    assert value == pytest.approx(2 * 2 * (1.0 * 2.0 + np.log(1e3)))
    assert "ln(1/eps)" in formula
    with pytest.raises(DomainError, match="positive"):
        predicted_cost_dqsp(cluster(H, PARTITION), 2.0, 0.0)
