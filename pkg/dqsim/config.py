"""
Run configuration and result rows.

A run is described by one JSON document, for example::

    {"protocol": "dpf", "hamiltonian": [{"coeff": 1.0, "pauli": "XXI"}, {"coeff": 0.5, "pauli": "IZZ"}],
     "partition": [[0, 1], [2]], "t": 1.0, "p": 2, "epsilon": 1e-3}

and produces one ResultRow. Rows are written as CSV with a fixed column order.
"""
from __future__ import annotations

import dataclasses
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from dqsim.apps import GroverInstance, grover_probability, qpe_distribution, run_dgrover, run_dqpe
from dqsim.dpf import run_dpf
from dqsim.dts import run_dts
from dqsim.errors import ConfigError, DqsimError, NumericalError, ShapeError, TopologyError
from dqsim.lcu import RO_MODES, DIRECT, balance_to_s2
from dqsim.pauli import (
    OperatorSum,
    QubitPartition,
    contiguous_partition,
    from_records,
    parse_pauli_sum,
    partition_from_nodes,
    random_operator_sum,
)
from dqsim.qnet import NetworkTopology, star, topology_from_config
from dqsim.qsp import run_dqsp
from dqsim.results import RunResult
from dqsim.statevector import random_state

PROTOCOLS = ("dpf", "dts", "dqsp", "dqpe", "dgrover")
SIMULATIONS = ("dpf", "dts", "dqsp")
INITIAL_STATES = ("operator", "zero", "random")
KNOWN_KEYS = {
    "protocol",
    "hamiltonian",
    "partition",
    "topology",
    "gamma",
    "t",
    "epsilon",
    "p",
    "r",
    "K",
    "step_mode",
    "ro_mode",
    "seed",
    "initial_state",
    "timing",
    "output",
    "phase_file",
    "bits",
    "phase",
    "qubits_per_node",
    "marked",
    "iterations",
}
RESULT_COLUMNS = [
    "protocol",
    "gamma",
    "n",
    "edges",
    "t",
    "epsilon",
    "steps",
    "qcomm_qubits",
    "ccomm_bits",
    "rounds",
    "predicted_cost",
    "error_vs_exact",
    "wall_ms",
    "seed",
    "status",
]
INT_COLUMNS = ("gamma", "n", "edges", "steps", "qcomm_qubits", "ccomm_bits", "rounds", "seed")
FLOAT_COLUMNS = ("t", "epsilon", "predicted_cost", "error_vs_exact", "wall_ms")
OK = "ok"
FIT = "fit"


@dataclass
class RunConfig:
    protocol: str
    document: Dict[str, Any]
    hamiltonian: Optional[OperatorSum] = None
    partition: Optional[QubitPartition] = None
    topology: Optional[NetworkTopology] = None
    t: float = math.nan
    epsilon: Optional[float] = None
    p: int = 1
    r: Optional[int] = None
    K: Optional[int] = None
    step_mode: str = "formula"
    ro_mode: str = DIRECT
    seed: int = 0
    initial_state: str = "operator"
    input_state: Optional[np.ndarray] = field(default=None, repr=False)
    timing: bool = False
    output: Optional[str] = None
    phase_file: Optional[str] = None
    bits: int = 3
    phase: float = 0.0
    qubits_per_node: int = 1
    marked: int = 0
    iterations: Optional[int] = None

    @property
    def gamma(self) -> int:
        return self.topology.gamma


@dataclass(eq=False)
class ResultRow:
    protocol: str
    gamma: int
    n: int
    edges: int
    t: float
    epsilon: float
    steps: int
    qcomm_qubits: int
    ccomm_bits: int
    rounds: int
    predicted_cost: float
    error_vs_exact: float
    wall_ms: float
    seed: int
    status: str = OK

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResultRow):
            return NotImplemented
        for name in RESULT_COLUMNS:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
                continue
            if a != b:
                return False
        return True


def _number(doc: dict, key: str, kind=float, default=None):
    value = doc.get(key)
    if value is None or value == "auto":
        return default
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Config key '{key}' must be {kind.__name__}, got {value!r}")


def _hamiltonian(doc: dict, rng: np.random.Generator) -> OperatorSum:
    entry = doc.get("hamiltonian")
    if entry is None:
        raise ConfigError(f"Protocol '{doc['protocol']}' needs a 'hamiltonian'")
    if isinstance(entry, str):
        return parse_pauli_sum(entry)
    if isinstance(entry, list):
        try:
            return from_records(entry)
        except (KeyError, TypeError, AttributeError) as err:
            raise ShapeError(f"Hamiltonian terms must look like {{'coeff': 0.5, 'pauli': 'XZ'}}: {err}")
    if isinstance(entry, dict) and "random" in entry:
        params = entry["random"]
        try:
            return random_operator_sum(
                rng, int(params["qubits"]), int(params["terms"]), int(params.get("max_weight", 2))
            )
        except KeyError as err:
            raise ConfigError(f"Random Hamiltonian needs {err} in its parameters")
    raise ConfigError(f"Unsupported hamiltonian entry {entry!r}")


def _partition(doc: dict, qubits: int) -> QubitPartition:
    if "partition" in doc:
        return partition_from_nodes(doc["partition"])
    gamma = doc.get("gamma") or doc.get("topology", {}).get("gamma")
    if gamma is None and isinstance(doc.get("hamiltonian"), dict):
        gamma = doc["hamiltonian"]["random"].get("gamma")
    return contiguous_partition(qubits, int(gamma or 1))


def _input_state(kind: str, qubits: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    if kind == "operator":
        return None
    if kind == "zero":
        vector = np.zeros(2**qubits, dtype=complex)
        vector[0] = 1.0
        return vector
    if kind == "random":
        return random_state(rng, qubits)
    raise ConfigError(f"Unknown initial_state '{kind}', use one of {INITIAL_STATES}")


def parse_config(doc: Dict[str, Any]) -> RunConfig:
    """Validate a config document. Random Hamiltonians and random input states are drawn from `seed`."""
    if not isinstance(doc, dict):
        raise ConfigError(f"Config must be a JSON object, got {type(doc).__name__}")
    unknown = sorted(set(doc) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config keys {unknown}")
    protocol = doc.get("protocol")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"Unknown protocol {protocol!r}, use one of {PROTOCOLS}")
    seed = _number(doc, "seed", int, 0)
    cfg = RunConfig(
        protocol=protocol,
        document=dict(doc),
        seed=seed,
        timing=bool(doc.get("timing", False)),
        output=doc.get("output"),
        ro_mode=doc.get("ro_mode", DIRECT),
    )
    if cfg.ro_mode not in RO_MODES:
        raise ConfigError(f"Unknown ro_mode '{cfg.ro_mode}', use one of {RO_MODES}")
    rng = np.random.default_rng(seed)

    if protocol in SIMULATIONS:
        if "t" not in doc:
            raise ConfigError(f"Protocol '{protocol}' needs a simulation time 't'")
        cfg.hamiltonian = _hamiltonian(doc, rng)
        cfg.partition = _partition(doc, cfg.hamiltonian.qubit_count)
        cfg.t = _number(doc, "t", float)
        cfg.epsilon = _number(doc, "epsilon", float)
        cfg.p = _number(doc, "p", int, 1)
        cfg.r = _number(doc, "r", int)
        cfg.K = _number(doc, "K", int)
        cfg.step_mode = doc.get("step_mode", "formula")
        cfg.phase_file = doc.get("phase_file")
        if protocol == "dpf" and cfg.r is None and cfg.epsilon is None:
            raise ConfigError("Protocol 'dpf' needs 'r' or 'epsilon'")
        if protocol == "dts" and cfg.K is None and cfg.epsilon is None:
            raise ConfigError("Protocol 'dts' needs 'K' or 'epsilon'")
        if protocol == "dqsp" and cfg.epsilon is None:
            raise ConfigError("Protocol 'dqsp' needs 'epsilon'")
        cfg.initial_state = doc.get("initial_state", "operator")
        cfg.input_state = _input_state(cfg.initial_state, cfg.hamiltonian.qubit_count, rng)
        gamma = cfg.partition.gamma
    else:
        gamma = _number(doc, "gamma", int, 2)
        cfg.qubits_per_node = _number(doc, "qubits_per_node", int, 1)
        cfg.bits = _number(doc, "bits", int, 3)
        cfg.phase = _number(doc, "phase", float, 0.0)
        cfg.marked = _number(doc, "marked", int, 0)
        cfg.iterations = _number(doc, "iterations", int)
        cfg.partition = contiguous_partition(gamma * cfg.qubits_per_node, gamma)

    topology = doc.get("topology")
    cfg.topology = topology_from_config(topology, gamma) if topology else star(gamma)
    if cfg.topology.gamma != gamma:
        raise TopologyError(f"Topology has {cfg.topology.gamma} nodes but the partition has {gamma}")
    return cfg


def load_config(filename: str) -> RunConfig:
    try:
        with open(filename) as f:
            doc = json.load(f)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{filename} is not valid JSON: {err}")
    except OSError as err:
        raise ConfigError(f"Cannot read config {filename}: {err}")
    return parse_config(doc)


def _nan(value: Optional[float]) -> float:
    return math.nan if value is None else float(value)


def simulation_row(cfg: RunConfig, result: RunResult, wall_ms: float) -> ResultRow:
    """qcomm and ccomm come straight from the run's ledger"""
    return ResultRow(
        protocol=result.protocol,
        gamma=result.gamma,
        n=result.qubits,
        edges=result.edges,
        t=float(result.t),
        epsilon=_nan(result.epsilon),
        steps=int(result.steps),
        qcomm_qubits=result.report.qubits_teleported,
        ccomm_bits=result.report.classical_bits,
        rounds=result.report.rounds,
        predicted_cost=_nan(result.predicted_cost),
        error_vs_exact=_nan(result.error),
        wall_ms=wall_ms,
        seed=cfg.seed,
    )


def qpe_decomposition(cfg: RunConfig):
    """V = diag(1, e^{2 pi i phase}) on the first qubit of node 1, identity elsewhere, balanced to s = 2"""
    factors = []
    for g in range(1, cfg.partition.gamma + 1):
        dim = 2 ** len(cfg.partition.qubits(g))
        factors.append(np.eye(dim, dtype=complex))
    phase_gate = np.diag([1.0, np.exp(2j * np.pi * cfg.phase)])
    factors[0] = np.kron(phase_gate, np.eye(factors[0].shape[0] // 2))
    return balance_to_s2(factors, cfg.partition)


def _run_dqpe(cfg: RunConfig, wall_ms) -> ResultRow:
    decomp = qpe_decomposition(cfg)
    n = cfg.partition.qubit_count
    eigenstate = np.zeros(2**n, dtype=complex)
    eigenstate[2 ** (n - 1)] = 1.0
    estimate = run_dqpe(decomp, eigenstate, cfg.bits, cfg.topology)
    exact = qpe_distribution(cfg.phase, cfg.bits)
    return ResultRow(
        protocol="dqpe",
        gamma=cfg.gamma,
        n=n,
        edges=0,
        t=math.nan,
        epsilon=math.nan,
        steps=cfg.bits,
        qcomm_qubits=estimate.report.qubits_teleported,
        ccomm_bits=estimate.report.classical_bits,
        rounds=estimate.report.rounds,
        predicted_cost=estimate.bound,
        error_vs_exact=float(0.5 * np.abs(estimate.distribution - exact).sum()),
        wall_ms=wall_ms(),
        seed=cfg.seed,
    )


def _run_dgrover(cfg: RunConfig, wall_ms) -> ResultRow:
    inst = GroverInstance(cfg.gamma, cfg.qubits_per_node, cfg.marked, cfg.iterations)
    result = run_dgrover(inst, cfg.topology, cfg.ro_mode)
    expected = grover_probability(inst.size, result.iterations)
    return ResultRow(
        protocol="dgrover",
        gamma=cfg.gamma,
        n=cfg.partition.qubit_count,
        edges=0,
        t=math.nan,
        epsilon=math.nan,
        steps=result.iterations,
        qcomm_qubits=result.report.qubits_teleported,
        ccomm_bits=result.report.classical_bits,
        rounds=result.report.rounds,
        predicted_cost=float(cfg.gamma * math.sqrt(inst.size)),
        error_vs_exact=abs(result.success_probability - expected),
        wall_ms=wall_ms(),
        seed=cfg.seed,
    )


def run_config(cfg: RunConfig) -> ResultRow:
    """Dispatch one configured run. wall_ms is measured only when the config asks for timing."""
    start = time.perf_counter()

    def wall_ms() -> float:
        return round((time.perf_counter() - start) * 1000, 3) if cfg.timing else 0.0

    logging.info(f"Running {cfg.protocol} with seed {cfg.seed}")
    if cfg.protocol == "dpf":
        result = run_dpf(
            cfg.hamiltonian,
            cfg.partition,
            cfg.t,
            cfg.p,
            cfg.r,
            cfg.epsilon,
            cfg.topology,
            cfg.input_state,
            cfg.step_mode,
        )
    elif cfg.protocol == "dts":
        result = run_dts(cfg.hamiltonian, cfg.partition, cfg.t, cfg.epsilon, cfg.topology, cfg.K, cfg.input_state)
    elif cfg.protocol == "dqsp":
        result = run_dqsp(
            cfg.hamiltonian, cfg.partition, cfg.t, cfg.epsilon, cfg.topology, cfg.input_state, cfg.phase_file
        )
    elif cfg.protocol == "dqpe":
        return _run_dqpe(cfg, wall_ms)
    else:
        return _run_dgrover(cfg, wall_ms)
    return simulation_row(cfg, result, wall_ms())


def _blank_row(doc: Dict[str, Any], protocol: str, status: str) -> ResultRow:
    return ResultRow(
        protocol=protocol,
        gamma=0,
        n=0,
        edges=0,
        t=_nan(doc.get("t")) if isinstance(doc.get("t"), (int, float)) else math.nan,
        epsilon=_nan(doc.get("epsilon")) if isinstance(doc.get("epsilon"), (int, float)) else math.nan,
        steps=0,
        qcomm_qubits=0,
        ccomm_bits=0,
        rounds=0,
        predicted_cost=math.nan,
        error_vs_exact=math.nan,
        wall_ms=0.0,
        seed=int(doc.get("seed", 0) or 0),
        status=status,
    )


def failed_row(doc: Dict[str, Any], error: Exception) -> ResultRow:
    return _blank_row(doc, str(doc.get("protocol", "")), f"{type(error).__name__}: {error}")


def rows_to_dataframe(rows: Sequence[ResultRow]) -> pd.DataFrame:
    return pd.DataFrame([dataclasses.asdict(r) for r in rows], columns=RESULT_COLUMNS)


def dataframe_to_rows(df: pd.DataFrame) -> List[ResultRow]:
    rows = []
    for record in df.to_dict(orient="records"):
        values = {}
        for name in RESULT_COLUMNS:
            value = record[name]
            if name in INT_COLUMNS:
                values[name] = int(value)
            elif name in FLOAT_COLUMNS:
                values[name] = float(value)
            else:
                values[name] = "" if isinstance(value, float) and math.isnan(value) else str(value)
        rows.append(ResultRow(**values))
    return rows


def read_results(text: str) -> List[ResultRow]:
    df = pd.read_csv(io.StringIO(text), float_precision="round_trip", keep_default_na=False, na_values=[""])
    missing = [c for c in RESULT_COLUMNS if c not in df.columns]
    if missing:
        raise ShapeError(f"Result CSV lacks columns {missing}")
    return dataframe_to_rows(df)


def parse_values(text: str) -> List[Any]:
    """'4,8,16' -> [4, 8, 16]; floats and words like 'auto' are kept as such"""
    values = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        for kind in (int, float):
            try:
                values.append(kind(item))
                break
            except ValueError:
                continue
        else:
            values.append(item)
    return values


def fit_slope(values: Sequence[Any], column: Sequence[float]) -> float:
    """Least-squares slope of log(column) against log(values) over the positive finite points"""
    x = np.array([float(v) if isinstance(v, (int, float)) else math.nan for v in values])
    y = np.asarray(column, dtype=float)
    mask = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if mask.sum() < 2:
        raise NumericalError(f"Log-log fit needs two positive points, got {int(mask.sum())}")
    slope, _ = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
    return float(slope)


def sweep(cfg: RunConfig, param: str, values: Sequence[Any], fit: bool = False) -> pd.DataFrame:
    """
    One row per value, in input order. A failing value is recorded in the status column and the sweep
    goes on. With `fit` a summary row carrying the log-log slope of error_vs_exact against the
    parameter is appended, the slope itself in its predicted_cost column.
    """
    if param not in KNOWN_KEYS - {"protocol", "output"}:
        raise ConfigError(f"Cannot sweep '{param}', it is not a config key")
    rows = []
    for value in values:
        doc = {**cfg.document, param: value}
        try:
            rows.append(run_config(parse_config(doc)))
        except DqsimError as err:
            logging.warning(f"Sweep {param}={value} failed: {err}")
            rows.append(failed_row(doc, err))
    if fit:
        errors = [r.error_vs_exact if r.status == OK else math.nan for r in rows]
        try:
            slope = fit_slope(values, errors)
            status = f"slope {slope:.6g} of log error_vs_exact against log {param}"
        except NumericalError as err:
            slope, status = math.nan, str(err)
        logging.info(f"Sweep fit: {status}")
        fit_row = _blank_row(cfg.document, FIT, status)
        fit_row.predicted_cost = slope
        rows.append(fit_row)
    return rows_to_dataframe(rows)
