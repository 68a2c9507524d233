"""Resource caps. Values are read from the environment on every call so they can be overridden at runtime."""
import os

from dqsim.errors import CapabilityError

DEFAULTS = {
    "DQSIM_QUBIT_CAP": 24,
    "DQSIM_DENSE_CAP": 12,
    "DQSIM_ENUMERATION_CAP": 4096,
    "DQSIM_OPERATOR_AMPLITUDES": 2**22,
}


def get_cap(var_name: str) -> int:
    value = os.getenv(var_name)
    if value is None or value == "":
        return DEFAULTS[var_name]
    try:
        return int(value)
    except ValueError:
        raise CapabilityError(f"Environment variable {var_name} must be an integer, got '{value}'")


def qubit_cap() -> int:
    return get_cap("DQSIM_QUBIT_CAP")


def dense_cap() -> int:
    return get_cap("DQSIM_DENSE_CAP")


def enumeration_cap() -> int:
    return get_cap("DQSIM_ENUMERATION_CAP")


def operator_amplitudes() -> int:
    return get_cap("DQSIM_OPERATOR_AMPLITUDES")


def check_qubits(total_qubits: int, what: str = "layout"):
    cap = qubit_cap()
    if total_qubits > cap:
        raise CapabilityError(f"{what} needs {total_qubits} qubits, cap is {cap} (set DQSIM_QUBIT_CAP to override)")


def check_dense(qubits: int, what: str = "dense matrix"):
    cap = dense_cap()
    if qubits > cap:
        raise CapabilityError(f"{what} on {qubits} qubits exceeds dense cap {cap} (set DQSIM_DENSE_CAP to override)")
