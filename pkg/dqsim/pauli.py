"""
Pauli-string operator algebra.

Qubit 0 is the most significant bit of a basis index and the leftmost letter of a Pauli string,
so dense matrices are Kronecker products taken in qubit order.
"""
from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from dqsim.errors import DomainError, ParseError, PartitionError, ShapeError
from dqsim.utils.caps import check_dense, dense_cap, enumeration_cap

AXES = "IXYZ"
SINGLE_QUBIT = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
LINE_RE = re.compile(r"^\s*(?P<coeff>\S+)\s+(?P<axes>\S+)\s*$")


@dataclass(frozen=True, order=True)
class PauliString:
    axes: str

    def __post_init__(self):
        if not self.axes:
            raise ShapeError("Pauli string must act on at least one qubit")
        bad = set(self.axes) - set(AXES)
        if bad:
            raise ShapeError(f"Invalid Pauli axes {sorted(bad)} in '{self.axes}'")

    def __len__(self) -> int:
        return len(self.axes)

    def __str__(self) -> str:
        return self.axes

    @property
    def qubit_count(self) -> int:
        return len(self.axes)

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(q for q, a in enumerate(self.axes) if a != "I")

    def restrict(self, qubits: Sequence[int]) -> str:
        """Axes of this string on the given qubits, in the given order"""
        return "".join(self.axes[q] for q in qubits)

    def matrix(self) -> np.ndarray:
        return pauli_matrix(self.axes)


def pauli_matrix(axes: str) -> np.ndarray:
    """Dense matrix of a Pauli string, built from its permutation and phase structure."""
    n = len(axes)
    dim = 2**n
    index = np.arange(dim)
    flip_mask = 0
    parity = np.zeros(dim, dtype=np.int64)
    y_count = 0
    for q, a in enumerate(axes):
        shift = n - 1 - q
        if a in "XY":
            flip_mask |= 1 << shift
        if a in "YZ":
            parity ^= (index >> shift) & 1
        if a == "Y":
            y_count += 1
    values = (1j**y_count) * (1 - 2 * parity)
    m = np.zeros((dim, dim), dtype=complex)
    m[index ^ flip_mask, index] = values
    return m


@dataclass(frozen=True)
class OperatorSum:
    """Real-weighted sum of Pauli strings in canonical form: merged, zero-free and sorted by string."""

    terms: Tuple[Tuple[float, PauliString], ...]
    qubit_count: int

    def __post_init__(self):
        for _, s in self.terms:
            if s.qubit_count != self.qubit_count:
                raise ShapeError(f"Pauli string '{s}' has length {s.qubit_count}, expected {self.qubit_count}")

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        if other.qubit_count != self.qubit_count:
            raise ShapeError(f"Cannot add {other.qubit_count}-qubit sum to {self.qubit_count}-qubit sum")
        return operator_sum(self.terms + other.terms, self.qubit_count)

    def __mul__(self, scalar: float) -> "OperatorSum":
        return operator_sum([(scalar * c, s) for c, s in self.terms], self.qubit_count)

    __rmul__ = __mul__

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    def to_text(self) -> str:
        return "".join(f"{c!r} {s}\n" for c, s in self.terms)


def operator_sum(terms: Iterable[Tuple[float, Union[str, PauliString]]], qubit_count: int) -> OperatorSum:
    """Build a canonical OperatorSum from (coefficient, string) pairs"""
    merged: Dict[PauliString, float] = {}
    for coeff, string in terms:
        if not isinstance(string, PauliString):
            string = PauliString(string)
        if string.qubit_count != qubit_count:
            raise ShapeError(f"Pauli string '{string}' has length {string.qubit_count}, expected {qubit_count}")
        merged[string] = merged.get(string, 0.0) + float(coeff)
    canonical = tuple((c, s) for s, c in sorted(merged.items()) if c != 0.0)
    return OperatorSum(canonical, qubit_count)


def parse_pauli_sum(text: str) -> OperatorSum:
    """Parse a term-per-line listing like ``0.5 XZI``. Blank lines and ``#`` comments are skipped."""
    terms = []
    width = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        match = LINE_RE.match(line)
        if match is None:
            raise ParseError(number, f"expected '<coefficient> <axes>', got '{raw.strip()}'")
        try:
            coeff = float(match.group("coeff"))
        except ValueError:
            raise ParseError(number, f"invalid coefficient '{match.group('coeff')}'")
        axes = match.group("axes").upper()
        if set(axes) - set(AXES):
            raise ParseError(number, f"invalid axes '{match.group('axes')}', use letters I, X, Y, Z")
        if width is None:
            width = len(axes)
        elif len(axes) != width:
            raise ShapeError(f"Line {number}: string length {len(axes)} differs from {width}")
        terms.append((coeff, axes))
    if width is None:
        raise ParseError(1, "no terms found")
    return operator_sum(terms, width)


def from_records(records: Sequence[dict]) -> OperatorSum:
    """Build an OperatorSum from [{"coeff": 0.5, "pauli": "XX"}, ...]"""
    if not records:
        raise ShapeError("Hamiltonian term list is empty")
    widths = {len(r["pauli"]) for r in records}
    if len(widths) != 1:
        raise ShapeError(f"Inconsistent Pauli string lengths {sorted(widths)}")
    return operator_sum([(r["coeff"], r["pauli"].upper()) for r in records], widths.pop())


def one_norm(h: OperatorSum) -> float:
    return float(np.sum(np.abs(h.coefficients))) if h.terms else 0.0


def dense_matrix(h: OperatorSum) -> np.ndarray:
    check_dense(h.qubit_count)
    dim = 2**h.qubit_count
    m = np.zeros((dim, dim), dtype=complex)
    for coeff, string in h.terms:
        m += coeff * string.matrix()
    return m


def spectral_norm(h: OperatorSum) -> float:
    check_dense(h.qubit_count, "spectral norm")
    if not h.terms:
        return 0.0
    eigenvalues = scipy.linalg.eigvalsh(dense_matrix(h))
    return float(np.max(np.abs(eigenvalues)))


@dataclass(frozen=True)
class QubitPartition:
    """node_of[q] is the 1-based node holding system qubit q"""

    node_of: Tuple[int, ...]
    gamma: int

    def __post_init__(self):
        if not self.node_of:
            raise PartitionError("Partition must cover at least one qubit")
        used = set(self.node_of)
        if used != set(range(1, self.gamma + 1)):
            missing = sorted(set(range(1, self.gamma + 1)) - used)
            extra = sorted(used - set(range(1, self.gamma + 1)))
            raise PartitionError(f"Every node must own a qubit: empty nodes {missing}, unknown nodes {extra}")

    @property
    def qubit_count(self) -> int:
        return len(self.node_of)

    def qubits(self, gamma: int) -> Tuple[int, ...]:
        return tuple(q for q, g in enumerate(self.node_of) if g == gamma)

    def nodes_of(self, qubits: Iterable[int]) -> Tuple[int, ...]:
        return tuple(sorted({self.node_of[q] for q in qubits}))


def partition_from_nodes(nodes: Sequence[Sequence[int]]) -> QubitPartition:
    """Partition from a list of per-node qubit lists, node 1 first"""
    node_of: Dict[int, int] = {}
    for gamma, qubits in enumerate(nodes, start=1):
        if not qubits:
            raise PartitionError(f"Node {gamma} has no qubits")
        for q in qubits:
            if q in node_of:
                raise PartitionError(f"Qubit {q} assigned to nodes {node_of[q]} and {gamma}")
            node_of[q] = gamma
    n = len(node_of)
    if sorted(node_of) != list(range(n)):
        raise PartitionError(f"Partition qubits must be 0..{n - 1}, got {sorted(node_of)}")
    return QubitPartition(tuple(node_of[q] for q in range(n)), len(nodes))


def contiguous_partition(qubits: int, gamma: int) -> QubitPartition:
    if not 1 <= gamma <= qubits:
        raise PartitionError(f"Cannot split {qubits} qubits over {gamma} nodes")
    sizes = [qubits // gamma + (1 if g < qubits % gamma else 0) for g in range(gamma)]
    bounds = np.cumsum([0] + sizes)
    return partition_from_nodes([list(range(bounds[g], bounds[g + 1])) for g in range(gamma)])


class InteractionTerm(NamedTuple):
    coeff: float
    string: PauliString
    support_nodes: Tuple[int, ...]

    @property
    def norm(self) -> float:
        return abs(self.coeff)


@dataclass(frozen=True)
class ClusteredHamiltonian:
    locals: Dict[int, OperatorSum]
    interactions: Tuple[InteractionTerm, ...]
    partition: QubitPartition
    qubit_count: int

    @property
    def gamma(self) -> int:
        return self.partition.gamma

    @property
    def num_edges(self) -> int:
        return len(self.interactions)

    @property
    def alpha(self) -> float:
        return sum(one_norm(h) for h in self.locals.values()) + sum(e.norm for e in self.interactions)

    def local_norm(self, gamma: int) -> float:
        return one_norm(self.locals[gamma])

    def h0(self) -> OperatorSum:
        """Sum of all node-local parts"""
        return operator_sum([t for g in sorted(self.locals) for t in self.locals[g].terms], self.qubit_count)

    def summands(self) -> List[OperatorSum]:
        """H_0 followed by one single-term sum per interaction"""
        return [self.h0()] + [operator_sum([(e.coeff, e.string)], self.qubit_count) for e in self.interactions]


def cluster(h: OperatorSum, part: QubitPartition) -> ClusteredHamiltonian:
    if part.qubit_count != h.qubit_count:
        raise PartitionError(f"Partition covers {part.qubit_count} qubits but the Hamiltonian acts on {h.qubit_count}")
    local_terms: Dict[int, list] = {g: [] for g in range(1, part.gamma + 1)}
    interactions = []
    for coeff, string in h.terms:
        nodes = part.nodes_of(string.support)
        if len(nodes) >= 2:
            interactions.append(InteractionTerm(coeff, string, nodes))
        else:
            # identity terms sit on node 1
            local_terms[nodes[0] if nodes else 1].append((coeff, string))
    locals_ = {g: operator_sum(terms, h.qubit_count) for g, terms in local_terms.items()}
    return ClusteredHamiltonian(locals_, tuple(interactions), part, h.qubit_count)


def flatten(ch: ClusteredHamiltonian) -> OperatorSum:
    terms = [t for g in sorted(ch.locals) for t in ch.locals[g].terms]
    terms += [(e.coeff, e.string) for e in ch.interactions]
    return operator_sum(terms, ch.qubit_count)


class CommutatorNorm(NamedTuple):
    value: float
    upper_bound: bool


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def nested_commutator_norm(ch: ClusteredHamiltonian, p: int) -> CommutatorNorm:
    """
    Sum over all index tuples (e_1..e_{p+1}) of the norm of [H_e1, [H_e2, ... [H_ep, H_e(p+1)]]],
    where index 0 is the node-local part. Past the enumeration or dense cap the triangle bound
    2^p (sum_e |H_e|)^(p+1) is returned instead, flagged as an upper bound.
    """
    if p not in (1, 2):
        raise DomainError(f"Nested commutator norm supports p in (1, 2), got {p}")
    summands = ch.summands()
    count = len(summands)
    if count ** (p + 1) > enumeration_cap() or ch.qubit_count > dense_cap():
        total = sum(one_norm(s) for s in summands)
        bound = 2**p * total ** (p + 1)
        logging.warning(f"Commutator enumeration over {count ** (p + 1)} tuples skipped, using bound {bound:.6g}")
        return CommutatorNorm(bound, True)
    matrices = [dense_matrix(s) for s in summands]
    inner = {}
    for a, b in itertools.product(range(count), repeat=2):
        inner[(a, b)] = _commutator(matrices[a], matrices[b]) if a != b else None
    value = 0.0
    for indices in itertools.product(range(count), repeat=p + 1):
        c = inner[indices[-2:]]
        if c is None:
            continue
        for e in reversed(indices[:-2]):
            c = _commutator(matrices[e], c)
        value += np.linalg.norm(c, 2)
    return CommutatorNorm(float(value), False)


def induced_one_norm(h: OperatorSum, k: int) -> float:
    """
    Largest total norm of the k-local blocks H_{j1..jk} sharing one fixed leg index.
    Terms with the same support form one block whose norm is taken on its support only.
    """
    blocks: Dict[Tuple[int, ...], list] = {}
    for coeff, string in h.terms:
        support = string.support
        if len(support) > k:
            raise DomainError(f"Term {string} acts on {len(support)} qubits, locality is {k}")
        if support:
            blocks.setdefault(support, []).append((coeff, string.restrict(support)))
    legs: Dict[Tuple[int, int], float] = {}
    for support, terms in blocks.items():
        norm = spectral_norm(operator_sum(terms, len(support)))
        for position, qubit in enumerate(support):
            legs[(position, qubit)] = legs.get((position, qubit), 0.0) + norm
    return max(legs.values()) if legs else 0.0


def random_operator_sum(
    rng: np.random.Generator, qubits: int, terms: int, max_weight: int = 2, min_coeff: float = 0.2
) -> OperatorSum:
    """Random sum of Pauli strings of weight 1..max_weight with coefficients bounded away from zero"""
    drawn = []
    for _ in range(terms):
        weight = int(rng.integers(1, min(max_weight, qubits) + 1))
        support = rng.choice(qubits, size=weight, replace=False)
        axes = ["I"] * qubits
        for q in support:
            axes[q] = "XYZ"[int(rng.integers(3))]
        coeff = float(rng.choice([-1.0, 1.0]) * rng.uniform(min_coeff, 1.0))
        drawn.append((coeff, "".join(axes)))
    return operator_sum(drawn, qubits)
