"""Run results and the input/oracle plumbing shared by the simulation protocols."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from dqsim.errors import ShapeError
from dqsim.qnet import CommReport
from dqsim.statevector import (
    Register,
    RegisterLayout,
    StateVector,
    allocate,
    as_operator,
    basis_batch,
    operator_distance,
    product_state,
    state_distance,
)
from dqsim.utils.caps import operator_amplitudes

SYSTEM = "sys"
OPERATOR = "operator"
STATE = "state"


@dataclass
class RunResult:
    """Output of one protocol run. `output` is the implemented operator in operator mode, else the output state."""

    protocol: str
    output: np.ndarray
    error: Optional[float]
    error_kind: str
    report: CommReport
    predicted_cost: float
    prediction_formula: str
    steps: int
    gamma: int
    qubits: int
    edges: int
    t: float
    epsilon: Optional[float] = None
    success_probability: float = 1.0
    metadata: dict = field(default_factory=dict)


def system_input(qubits: int, ancilla_qubits: int, input_state: Optional[np.ndarray] = None) -> StateVector:
    """
    Input for a run on `qubits` system qubits. Without an explicit input state the whole system basis is
    propagated as a batch when it fits the amplitude budget, so the run measures the operator error.
    """
    lay = RegisterLayout((Register(SYSTEM, qubits, None),))
    if input_state is not None:
        vector = np.asarray(input_state, dtype=complex)
        if vector.shape != (2**qubits,):
            raise ShapeError(f"Input state has shape {vector.shape}, expected ({2 ** qubits},)")
        return product_state(lay, {SYSTEM: vector / np.linalg.norm(vector)})
    if 2 ** (qubits + ancilla_qubits) * 2**qubits <= operator_amplitudes():
        return basis_batch(lay, SYSTEM)
    logging.warning(
        f"Operator batch of {qubits + ancilla_qubits} qubits exceeds the amplitude budget, measuring the |0> state"
    )
    return allocate(lay)


def compare_with_exact(
    state: StateVector, exact: np.ndarray, input_state: StateVector
) -> Tuple[np.ndarray, float, str]:
    """Distance between what the run produced and the exact unitary applied to the same input"""
    if state.batch_shape:
        implemented = as_operator(state)
        return implemented, operator_distance(implemented, exact), OPERATOR
    expected = exact @ input_state.vector
    return state.vector.copy(), state_distance(state.vector, expected), STATE
