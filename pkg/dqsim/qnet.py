"""
Network model and communication accounting.

Node 0 is the control node of a star network; QPU nodes are numbered 1..gamma. Qubit locations are
bookkeeping only: the amplitude math never depends on them, the ledger does.
"""
from __future__ import annotations

import collections
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from dqsim.errors import DomainError, TopologyError
from dqsim.statevector import Register, StatePrep, StateVector, allocate, cnot, layout

CONTROL = 0
KINDS = ("star", "chain", "custom")

Channel = Tuple[int, int]


def channel(a: int, b: int) -> Channel:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class NetworkTopology:
    kind: str
    gamma: int
    channels: Tuple[Channel, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TopologyError(f"Unknown topology kind '{self.kind}', use one of {KINDS}")
        if self.gamma < 1:
            raise TopologyError(f"Network needs at least one node, got gamma={self.gamma}")
        for a, b in self.channels:
            if a == b or not (0 <= a <= self.gamma and 0 <= b <= self.gamma):
                raise TopologyError(f"Invalid channel ({a}, {b}) for {self.gamma} nodes")
        if self.kind == "star":
            expected = {channel(CONTROL, g) for g in range(1, self.gamma + 1)}
            if set(self.channels) != expected:
                raise TopologyError("Star topology must connect control to every node and nothing else")
        unreached = set(self.nodes) - set(self._bfs_parents(self.nodes[0]))
        if unreached:
            raise TopologyError(f"Topology is disconnected, unreachable nodes {sorted(unreached)}")

    @property
    def has_control(self) -> bool:
        return any(CONTROL in c for c in self.channels) or self.kind == "star"

    @property
    def nodes(self) -> Tuple[int, ...]:
        first = CONTROL if self.has_control else 1
        return tuple(range(first, self.gamma + 1))

    @property
    def source(self) -> int:
        """Node where shared ancilla states are prepared"""
        return CONTROL if self.has_control else 1

    def neighbours(self, node: int) -> List[int]:
        return sorted({b if a == node else a for a, b in self.channels if node in (a, b)})

    def _bfs_parents(self, start: int) -> Dict[int, Optional[int]]:
        parents: Dict[int, Optional[int]] = {start: None}
        queue = collections.deque([start])
        while queue:
            node = queue.popleft()
            for nb in self.neighbours(node):
                if nb not in parents:
                    parents[nb] = node
                    queue.append(nb)
        return parents

    def path(self, a: int, b: int) -> List[Channel]:
        """Channels of a shortest path from a to b"""
        parents = self._bfs_parents(a)
        if b not in parents:
            raise TopologyError(f"No path from node {a} to node {b}")
        hops = []
        node = b
        while parents[node] is not None:
            hops.append(channel(parents[node], node))
            node = parents[node]
        return hops[::-1]

    def distance(self, a: int, b: int) -> int:
        return len(self.path(a, b))


def star(gamma: int) -> NetworkTopology:
    return NetworkTopology("star", gamma, tuple(channel(CONTROL, g) for g in range(1, gamma + 1)))


def chain(gamma: int) -> NetworkTopology:
    return NetworkTopology("chain", gamma, tuple(channel(g, g + 1) for g in range(1, gamma)))


def custom(gamma: int, edges: Sequence[Sequence[int]]) -> NetworkTopology:
    return NetworkTopology("custom", gamma, tuple(sorted({channel(int(a), int(b)) for a, b in edges})))


def topology_from_config(cfg: dict, gamma: Optional[int] = None) -> NetworkTopology:
    """Topology from {"kind": "star"|"chain"|"custom", "gamma": int, "edges": [[a, b], ...]}"""
    kind = cfg.get("kind", "star")
    if kind not in KINDS:
        raise TopologyError(f"Unknown topology kind '{kind}', use one of {KINDS}")
    gamma = int(cfg.get("gamma", gamma or 0))
    if kind == "star":
        return star(gamma)
    if kind == "chain":
        return chain(gamma)
    if "edges" not in cfg:
        raise TopologyError("Custom topology needs an 'edges' list")
    return custom(gamma, cfg["edges"])


@dataclass
class Counter:
    qubits: int = 0
    classical_bits: int = 0


class CommLedger:
    """Per-channel and per-phase teleportation counters of one run"""

    def __init__(self, topology: NetworkTopology):
        self.topology = topology
        self.channels: Dict[Channel, Counter] = {c: Counter() for c in topology.channels}
        self.phases: Dict[str, Counter] = {}
        self.rounds = 0

    def teleport(self, link: Channel, qubit_count: int, phase: str = "misc"):
        """Teleporting one qubit costs one qubit of quantum communication and two classical bits"""
        link = channel(*link)
        if link not in self.channels:
            raise TopologyError(f"Unknown channel {link} in {self.topology.kind} topology")
        if qubit_count < 0:
            raise DomainError(f"Cannot teleport {qubit_count} qubits")
        if qubit_count == 0:
            return
        for counter in (self.channels[link], self.phases.setdefault(phase, Counter())):
            counter.qubits += qubit_count
            counter.classical_bits += 2 * qubit_count

    def send(self, a: int, b: int, qubit_count: int, phase: str = "misc") -> int:
        """Move qubits between nodes along a shortest path; returns the number of channels traversed"""
        hops = self.topology.path(a, b)
        for link in hops:
            self.teleport(link, qubit_count, phase)
        return len(hops)

    def next_round(self, count: int = 1):
        self.rounds += count

    @property
    def qubits_teleported(self) -> int:
        return sum(c.qubits for c in self.channels.values())

    @property
    def classical_bits(self) -> int:
        return sum(c.classical_bits for c in self.channels.values())


def teleport(ledger: CommLedger, link: Channel, qubit_count: int, phase: str = "misc") -> CommLedger:
    ledger.teleport(link, qubit_count, phase)
    return ledger


@dataclass(frozen=True)
class CommReport:
    qubits_teleported: int
    classical_bits: int
    rounds: int
    channels: Dict[Channel, Tuple[int, int]] = field(default_factory=dict)
    phases: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    def phase_table(self) -> pd.DataFrame:
        df = pd.DataFrame(
            [(name, q, c) for name, (q, c) in self.phases.items()],
            columns=["phase", "qubits_teleported", "classical_bits"],
        )
        return df.sort_values("phase", kind="stable").reset_index(drop=True)

    def channel_table(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(f"{a}-{b}", q, c) for (a, b), (q, c) in sorted(self.channels.items())],
            columns=["channel", "qubits_teleported", "classical_bits"],
        )


def ledger_report(ledger: CommLedger) -> CommReport:
    return CommReport(
        qubits_teleported=ledger.qubits_teleported,
        classical_bits=ledger.classical_bits,
        rounds=ledger.rounds,
        channels={k: (v.qubits, v.classical_bits) for k, v in ledger.channels.items()},
        phases={k: (v.qubits, v.classical_bits) for k, v in ledger.phases.items()},
    )


@dataclass(frozen=True)
class DistributionPlan:
    """
    Relay of a repetition-encoded register: the source prepares the state, then every route entry
    (parent, child) copies the parent's value with local CNOTs and teleports the copy to the child.
    """

    source: int
    width: int
    targets: Tuple[int, ...]
    route: Tuple[Tuple[int, int], ...]
    depth: int

    @property
    def traversals(self) -> int:
        return len(self.route)

    @property
    def cost(self) -> int:
        return self.traversals * self.width


def plan_distribution(topology: NetworkTopology, width: int) -> DistributionPlan:
    source = topology.source
    targets = tuple(range(1, topology.gamma + 1))
    parents = topology._bfs_parents(source)
    order = list(parents)
    needed = set()
    for t in targets:
        node = t
        while parents[node] is not None:
            needed.add((parents[node], node))
            node = parents[node]
    route = tuple((parents[n], n) for n in order if (parents[n], n) in needed)
    depth = max((topology.distance(source, t) for t in targets), default=0)
    return DistributionPlan(source, width, targets, route, depth)


def _copy_sources(plan: DistributionPlan) -> List[Tuple[int, int]]:
    """(from_node, to_node) register copies, where from_node is the nearest target ancestor"""
    parents = {child: parent for parent, child in plan.route}
    origin = plan.source if plan.source in plan.targets else plan.targets[0]
    copies = []
    for _, child in plan.route:
        if child == origin:
            continue
        node = parents[child]
        while node not in plan.targets and node in parents:
            node = parents[node]
        copies.append((node if node in plan.targets else origin, child))
    return copies


def _fan_out(state: StateVector, registers: Dict[int, str], copies, reverse: bool):
    for src, dst in reversed(copies) if reverse else copies:
        for cq, tq in zip(state.layout.qubits(registers[src]), state.layout.qubits(registers[dst])):
            cnot(state, cq, tq)


def apply_distribution(
    state: StateVector,
    prep: StatePrep,
    registers: Dict[int, str],
    topology: NetworkTopology,
    ledger: CommLedger,
    phase: str = "distribute-G_C",
    controls: Optional[Dict[int, int]] = None,
) -> StateVector:
    """
    Prepare sum_j beta_j |j>^{(x) gamma} on the per-node copy registers and charge the relay.
    `registers` maps node -> register name. Controls restrict the preparation, not the fan-out.
    """
    plan = plan_distribution(topology, prep.width)
    origin = plan.source if plan.source in plan.targets else plan.targets[0]
    prep.apply(state, state.layout.qubits(registers[origin]), controls)
    _fan_out(state, registers, _copy_sources(plan), reverse=False)
    _charge(plan, ledger, phase)
    return state


def apply_collection(
    state: StateVector,
    prep: StatePrep,
    registers: Dict[int, str],
    topology: NetworkTopology,
    ledger: CommLedger,
    phase: str = "return",
    controls: Optional[Dict[int, int]] = None,
) -> StateVector:
    """Inverse of apply_distribution; retraces the route with identical charges"""
    plan = plan_distribution(topology, prep.width)
    origin = plan.source if plan.source in plan.targets else plan.targets[0]
    _fan_out(state, registers, _copy_sources(plan), reverse=True)
    prep.apply(state, state.layout.qubits(registers[origin]), controls)
    _charge(plan, ledger, phase)
    return state


def _charge(plan: DistributionPlan, ledger: CommLedger, phase: str):
    for link in plan.route:
        ledger.teleport(link, plan.width, phase)
    ledger.next_round(plan.depth)
    logging.debug(f"Relay of {plan.width} qubits over {plan.traversals} channels ({phase})")


def charge_fanout(topology: NetworkTopology, ledger: CommLedger, width: int = 1, phase: str = "fan-out") -> int:
    """Charge a distribution of `width` qubits to every node without touching amplitudes"""
    plan = plan_distribution(topology, width)
    _charge(plan, ledger, phase)
    return plan.cost


def copy_registers(topology: NetworkTopology, width: int, prefix: str = "C") -> Tuple[Register, ...]:
    return tuple(Register(f"{prefix}{g}", width, g) for g in range(1, topology.gamma + 1))


def repetition_weights(weights: Sequence[Tuple[int, float]], width: int) -> StatePrep:
    """StatePrep from (value, amplitude) pairs"""
    amplitudes = np.zeros(2**width, dtype=complex)
    for value, amplitude in weights:
        if not 0 <= value < 2**width:
            raise DomainError(f"Value {value} does not fit {width} qubits")
        amplitudes[value] = amplitude
    if abs(np.linalg.norm(amplitudes) - 1.0) > 1e-10:
        raise DomainError(f"Distribution weights have norm {np.linalg.norm(amplitudes):.12f}, expected 1")
    return StatePrep(amplitudes)


def distribute_repetition_state(
    weights: Sequence[Tuple[int, float]], width: int, topology: NetworkTopology, ledger: CommLedger
) -> StateVector:
    """Fresh Γ-copy register state sum_j beta_j |j>^{(x) Γ}, one copy resident on every node"""
    prep = repetition_weights(weights, width)
    registers = copy_registers(topology, width)
    state = allocate(layout(*registers))
    return apply_distribution(state, prep, {r.owner: r.name for r in registers}, topology, ledger)


def collect_repetition_state(
    state: StateVector, weights: Sequence[Tuple[int, float]], width: int, topology: NetworkTopology, ledger: CommLedger
) -> StateVector:
    prep = repetition_weights(weights, width)
    registers = copy_registers(topology, width)
    return apply_collection(state, prep, {r.owner: r.name for r in registers}, topology, ledger)
