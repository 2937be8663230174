"""
Clock Hamiltonians for verification circuits.

Data qubits are 1..M and clock qubit c_t is qubit M+t.  Three builders:

    build_4local   Toffoli circuits, one clock qubit per propagation hop, stoquastic
    build_3local   Clifford+T circuits (STEC expansions or plain 1-/2-qubit gates)
    build_sparse6  row-snake circuits, clock windows of up to three qubits

Each returns a ClockHam carrying its local terms and the history-state query.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .circuit import CircuitDescriptor, Gate, StecDescriptor
from .errors import BadClockWord, CapExceeded, LocalityExceeded, NonToffoliGate
from .exactnum import EXACT_ONE, EXACT_ZERO, ExactValue
from .oracle import ORACLE_QUBIT_CAP, DenseState
from .qstate import (OMEGA, OMEGA_DAGGER, SQRT_HALF, AmplitudeQuery, HybridSpec, basis_strings,
                     clock_step, clock_word, history_query_classical, history_query_stec)
from .xform import SparseHam

logger = logging.getLogger(__name__)

# Configuration
CLOCK_PENALTY_EXPONENT = 12
LOCALITY_BOUNDS = {'4local': 4, '3local': 3, 'sparse6': 6}

HALF = ExactValue.of(Fraction(1, 2))
MINUS_HALF = ExactValue.of(Fraction(-1, 2))

LocalMatrix = Dict[Tuple[str, str], ExactValue]


@dataclass(frozen=True)
class LocalTerm:
    support: Tuple[int, ...]
    matrix: Mapping[Tuple[str, str], ExactValue]
    label: str

    @cached_property
    def by_column(self) -> Dict[str, List[Tuple[str, ExactValue]]]:
        out: Dict[str, List[Tuple[str, ExactValue]]] = {}
        for (a, b), value in self.matrix.items():
            if not value.is_zero:
                out.setdefault(b, []).append((a, value))
        return out

    def is_hermitian(self) -> bool:
        return all(self.matrix.get((b, a), EXACT_ZERO) == v.conjugate() for (a, b), v in self.matrix.items())

    def is_stoquastic(self) -> bool:
        for (a, b), v in self.matrix.items():
            if a != b and not v.is_zero and (not v.is_real or v.sign() > 0):
                return False
        return True


@dataclass(frozen=True)
class ClockHam:
    variant: str
    terms: Tuple[LocalTerm, ...]
    data_qubits: int
    clock_qubits: int
    history: AmplitudeQuery
    circuit: CircuitDescriptor

    @property
    def total_qubits(self) -> int:
        return self.data_qubits + self.clock_qubits

    @property
    def locality(self) -> int:
        return max((len(t.support) for t in self.terms), default=0)

    def clock(self, t: int) -> int:
        return self.data_qubits + t

    def is_legal(self, x: str) -> bool:
        try:
            clock_step(x[self.data_qubits:])
        except BadClockWord:
            return False
        return True


def legal_clock_words(K: int) -> List[str]:
    return [clock_word(t, K) for t in range(K + 1)]


def legal_subspace_predicate(h: ClockHam) -> Callable[[str], bool]:
    return h.is_legal


def gate_matrix(gate: Gate) -> LocalMatrix:
    """Matrix of one gate over its own qubits, in the gate's qubit order."""
    k = len(gate.qubits)
    out: LocalMatrix = {}
    if gate.is_classical:
        local = Gate(gate.kind, tuple(range(1, k + 1)))
        for b in basis_strings(k):
            out[(local.apply_classical(b), b)] = EXACT_ONE
        return out
    if gate.kind == 'H':
        return {('0', '0'): SQRT_HALF, ('0', '1'): SQRT_HALF, ('1', '0'): SQRT_HALF, ('1', '1'): -SQRT_HALF}
    phase = OMEGA if gate.kind == 'T' else OMEGA_DAGGER
    return {('0', '0'): EXACT_ONE, ('1', '1'): phase}


def _add(matrix: LocalMatrix, key: Tuple[str, str], value: ExactValue):
    total = matrix[key] + value if key in matrix else value
    if total.is_zero:
        matrix.pop(key, None)
    else:
        matrix[key] = total


def _projector(qubits: Sequence[int], pattern: str, weight: ExactValue, label: str) -> LocalTerm:
    return LocalTerm(tuple(qubits), {(pattern, pattern): weight}, label)


def _penalty(q: int, role: str, bit: str, clocks: Sequence[int], pattern: str, label: str) -> Optional[LocalTerm]:
    """Single-qubit initialization penalty gated on a clock pattern."""
    if role == 'w':
        return None
    support = (q,) + tuple(clocks)
    if role == '+':
        # |-><-| = (I - X)/2
        matrix = {('0' + pattern, '0' + pattern): HALF, ('1' + pattern, '1' + pattern): HALF,
                  ('0' + pattern, '1' + pattern): MINUS_HALF, ('1' + pattern, '0' + pattern): MINUS_HALF}
        return LocalTerm(support, matrix, label)
    wrong = '1' if role == '0' else ('0' if bit == '1' else '1')
    return LocalTerm(support, {(wrong + pattern, wrong + pattern): EXACT_ONE}, label)


def _hop(gate: Gate, clocks: Sequence[int], before: str, after: str, weight: ExactValue,
         diagonal: bool, label: str) -> LocalTerm:
    """
    weight * ( [|before><before| + |after><after|] - U (x) |after><before| - U^dag (x) |before><after| )
    over the gate's qubits and a clock window.
    """
    U = gate_matrix(gate)
    k = len(gate.qubits)
    matrix: LocalMatrix = {}
    if diagonal:
        for a in basis_strings(k):
            _add(matrix, (a + before, a + before), weight)
            _add(matrix, (a + after, a + after), weight)
    for (a, b), u in U.items():
        _add(matrix, (a + after, b + before), -(weight * u))
        _add(matrix, (b + before, a + after), -(weight * u.conjugate()))
    return LocalTerm(tuple(gate.qubits) + tuple(clocks), matrix, label)


def _initial_roles(c: CircuitDescriptor, x: str, xi: str) -> List[Tuple[int, str, str]]:
    if len(x) != c.roles.count('x') or len(xi) != c.roles.count('w'):
        raise ValueError(f"input/proof lengths {len(x)}/{len(xi)} do not match roles {c.roles!r}")
    inputs, proofs = iter(x), iter(xi)
    out = []
    for q, role in enumerate(c.roles, 1):
        bit = next(inputs) if role == 'x' else next(proofs) if role == 'w' else ''
        out.append((q, role, bit))
    return out


def _single_clock_terms(c: CircuitDescriptor, x: str, xi: str) -> List[LocalTerm]:
    """Terms shared by the 4-local and 3-local builders: one clock qubit per hop."""
    M, K = c.M, c.K
    clock = lambda t: M + t
    terms: List[LocalTerm] = []
    for q, role, bit in _initial_roles(c, x, xi):
        term = _penalty(q, role, bit, [clock(1)], '0', f"in[{q}]")
        if term is not None:
            terms.append(term)
    terms.append(_projector([c.output_qubit, clock(K)], '01', EXACT_ONE, 'out'))
    penalty = ExactValue.of(K ** CLOCK_PENALTY_EXPONENT)
    for i in range(1, K + 1):
        for j in range(i + 1, K + 1):
            terms.append(_projector([clock(i), clock(j)], '01', penalty, f"clock[{i},{j}]"))
    for t, gate in enumerate(c.gates, 1):
        if t == 1:
            terms.append(_projector([clock(1)], '0', HALF, 'prop(1)'))
        else:
            terms.append(_projector([clock(t - 1), clock(t)], '10', HALF, f"prop({t})"))
        if t == K:
            terms.append(_projector([clock(K)], '1', HALF, f"prop({t})"))
        else:
            terms.append(_projector([clock(t), clock(t + 1)], '10', HALF, f"prop({t})"))
        terms.append(_hop(gate, [clock(t)], '0', '1', HALF, False, f"prop({t})"))
    return terms


def build_4local(c: CircuitDescriptor, x: str, xi: str = '') -> ClockHam:
    """
    Stoquastic clock Hamiltonian of a Toffoli circuit: input penalties at clock 0,
    output penalty at clock K, all-pairs K^12 clock penalties and half-weighted
    propagation terms coupling each R_t to clock qubit c_t only.
    """
    if c.K < 1:
        raise ValueError("the 4-local construction needs at least one gate")
    for gate in c.gates:
        if not gate.is_classical:
            raise NonToffoliGate(f"{gate} at position {gate.position} is not a Toffoli-family gate")
    terms = _single_clock_terms(c, x, xi)
    history = history_query_classical(HybridSpec.for_circuit(c, x, xi))
    logger.info("4-local: %d terms on %d data + %d clock qubits", len(terms), c.M, c.K)
    return ClockHam('4local', tuple(terms), c.M, c.K, history, c)


def build_3local(s: Union[StecDescriptor, CircuitDescriptor], x: str, xi: str = '') -> ClockHam:
    """Same clock scheme over 1- and 2-qubit Clifford+T gates; complex in general."""
    c = s.expanded if isinstance(s, StecDescriptor) else s
    if c.K < 1:
        raise ValueError("the 3-local construction needs at least one gate")
    for gate in c.gates:
        if len(gate.qubits) > 2:
            raise LocalityExceeded(f"{gate} at position {gate.position} acts on {len(gate.qubits)} qubits")
    terms = _single_clock_terms(c, x, xi)
    history = history_query_stec(HybridSpec.for_circuit(s, x, xi))
    logger.info("3-local: %d terms on %d data + %d clock qubits", len(terms), c.M, c.K)
    return ClockHam('3local', tuple(terms), c.M, c.K, history, c)


def _window(S: int, t: int) -> Tuple[List[int], str, str]:
    """Clock window of step t among S: indices and the before/after patterns."""
    if S == 1:
        return [1], '0', '1'
    if t == 1:
        return [1, 2], '00', '10'
    if t == S:
        return [S - 1, S], '10', '11'
    return [t - 1, t, t + 1], '100', '110'


def _input_window(S: int, first: int) -> Tuple[List[int], str]:
    """Window picking out the legal clock word at time first-1, clipped to 1..S."""
    indices, pattern = [], ''
    for index, bit in zip((first - 1, first, first + 1), '100'):
        if 1 <= index <= S:
            indices.append(index)
            pattern += bit
    return indices, pattern


def build_sparse6(c: CircuitDescriptor, x: str, xi: str = '') -> ClockHam:
    """
    Clock Hamiltonian of a row-snake circuit: one clock qubit per operation,
    adjacent-pair clock penalties and windowed propagation terms.  Each data
    qubit is checked at the clock word just before its first operation.
    """
    if c.layout is None:
        raise ValueError("build_sparse6 needs a spatially sparsified circuit")
    S, M = c.K, c.M
    if S < 1:
        raise ValueError("the sparse construction needs at least one operation")
    clock = lambda t: M + t
    first = {}
    for t, gate in enumerate(c.gates, 1):
        for q in gate.qubits:
            first.setdefault(q, t)

    terms: List[LocalTerm] = []
    for q, role, bit in _initial_roles(c, x, xi):
        indices, pattern = _input_window(S, first.get(q, 1))
        term = _penalty(q, role, bit, [clock(i) for i in indices], pattern, f"in[{q}]")
        if term is not None:
            terms.append(term)
    terms.append(_projector([c.output_qubit, clock(S)], '01', EXACT_ONE, 'out'))
    for t in range(1, S):
        terms.append(_projector([clock(t), clock(t + 1)], '01', EXACT_ONE, f"clock[{t},{t + 1}]"))
    for t, gate in enumerate(c.gates, 1):
        indices, before, after = _window(S, t)
        terms.append(_hop(gate, [clock(i) for i in indices], before, after, EXACT_ONE, True, f"prop({t})"))
    history = history_query_classical(HybridSpec.for_circuit(c, x, xi))
    logger.info("sparse6: %d terms on %d data + %d clock qubits (layout %s)", len(terms), M, S, c.layout)
    return ClockHam('sparse6', tuple(terms), M, S, history, c)


def as_sparse(h: ClockHam) -> SparseHam:
    return SparseHam.from_terms(h.total_qubits, ((t.support, t.matrix) for t in h.terms), f"H[{h.variant}]")


def apply_terms(h: ClockHam, state: DenseState) -> DenseState:
    """H|state> computed term by term over the state's support."""
    out: Dict[str, ExactValue] = {}
    for term in h.terms:
        columns = term.by_column
        for x, amplitude in state.amplitudes.items():
            local = ''.join(x[q - 1] for q in term.support)
            for row, value in columns.get(local, ()):
                y = list(x)
                for q, bit in zip(term.support, row):
                    y[q - 1] = bit
                key = ''.join(y)
                product = value * amplitude
                out[key] = out[key] + product if key in out else product
    return DenseState.of(state.n, out)


def history_vector(h: ClockHam, cap: int = ORACLE_QUBIT_CAP) -> DenseState:
    """History state on its legal-clock support, straight from the query."""
    if h.data_qubits > cap:
        raise CapExceeded(f"{h.data_qubits} data qubits exceed the oracle cap of {cap}")
    out = {}
    for z in legal_clock_words(h.clock_qubits):
        for y in basis_strings(h.data_qubits):
            value = h.history(y + z)
            if not value.is_zero:
                out[y + z] = value
    return DenseState(h.total_qubits, out)


def energy(h: ClockHam, state: DenseState) -> ExactValue:
    return state.inner(apply_terms(h, state))


@dataclass(frozen=True)
class AnnihilationReport:
    expectation: ExactValue
    legal_residual: int
    full_residual: int

    @property
    def legal_ok(self) -> bool:
        return self.expectation.is_zero and self.legal_residual == 0

    @property
    def full_ok(self) -> bool:
        return self.legal_ok and self.full_residual == 0


def annihilation_check(h: ClockHam, cap: int = ORACLE_QUBIT_CAP) -> AnnihilationReport:
    """
    <eta|H|eta>, and how many basis strings carry H|eta> inside and outside the
    legal clock subspace.
    """
    eta = history_vector(h, cap)
    image = apply_terms(h, eta)
    legal = sum(1 for x in image.amplitudes if h.is_legal(x))
    report = AnnihilationReport(eta.inner(image), legal, len(image.amplitudes))
    if not report.full_ok:
        logger.info("%s: H|eta> has %d legal and %d total nonzero entries", h.variant, legal, report.full_residual)
    return report


def locality_audit(h: ClockHam, bound: Optional[int] = None) -> bool:
    bound = LOCALITY_BOUNDS[h.variant] if bound is None else bound
    return h.locality <= bound


def stoquastic_audit(h: ClockHam) -> List[str]:
    """Labels of terms with a positive or complex off-diagonal entry."""
    return [t.label for t in h.terms if not t.is_stoquastic()]


def interaction_degree(h: ClockHam) -> int:
    """Max number of distinct qubits any qubit shares a term with."""
    neighbours: Dict[int, set] = {}
    for term in h.terms:
        for q in term.support:
            neighbours.setdefault(q, set()).update(p for p in term.support if p != q)
    return max((len(v) for v in neighbours.values()), default=0)


def illegal_clock_energy(h: ClockHam, x: str) -> ExactValue:
    """<x|H_clock|x> for a basis string x."""
    total = EXACT_ZERO
    for term in h.terms:
        if term.label.startswith('clock['):
            local = ''.join(x[q - 1] for q in term.support)
            total = total + term.matrix.get((local, local), EXACT_ZERO)
    return total
