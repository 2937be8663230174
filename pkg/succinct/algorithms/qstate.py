"""
Succinct states as query objects.

An AmplitudeQuery maps an n-bit string x to c * alpha(x) exactly, for one positive
scale c shared by every x.  The combinators below build new queries from old ones
(tensor products, gate pushforwards, history states, the complex -> real split)
without ever writing the 2^n amplitudes down.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .circuit import BLOCK_LENGTH, CircuitDescriptor, Gate, StecDescriptor
from .errors import (BadClockWord, CardinalityUnknown, CostExceeded, FlagMismatch,
                     HadamardBudgetExceeded, NonClassicalGate, OutOfRange,
                     ZeroDenominatorAmplitude)
from .exactnum import (EXACT_ONE, EXACT_ZERO, ClassDescriptor, ExactValue, omega_expand,
                       ratio, sqrt_of)

logger = logging.getLogger(__name__)

# Configuration
HADAMARD_CAP = 8
OVERLAP_QUERY_BUDGET = 256

SQRT_HALF = ExactValue(re=EXACT_ONE.re, sqrt_half_power=1).canonical()
OMEGA = omega_expand(1).canonical()
OMEGA_DAGGER = omega_expand(7).canonical()

_FAMILY_ORDER = ('N', 'Qplus', 'Q', 'C')


def basis_strings(n: int) -> Iterator[str]:
    for bits in itertools.product('01', repeat=n):
        yield ''.join(bits)


def clock_word(t: int, K: int) -> str:
    """Unary clock word 1^t 0^(K-t)."""
    return '1' * t + '0' * (K - t)


def clock_step(z: str) -> int:
    """Inverse of clock_word; BadClockWord when z is not unary."""
    k = z.find('0')
    if k < 0:
        return len(z)
    if '1' in z[k:]:
        raise BadClockWord(f"clock register {z!r} is not of the form 1^k 0^(K-k)")
    return k


@dataclass(frozen=True)
class ScaleClass:
    """The common scale c: exact when known, otherwise a bound c <= 2^log2_bound."""
    value: Optional[ExactValue] = None
    log2_bound: Optional[Fraction] = None

    def times(self, other: 'ScaleClass') -> 'ScaleClass':
        value = self.value * other.value if self.value is not None and other.value is not None else None
        bound = (self.log2_bound + other.log2_bound
                 if self.log2_bound is not None and other.log2_bound is not None else None)
        return ScaleClass(value, bound)

    def __str__(self) -> str:
        if self.value is not None:
            return str(self.value)
        return f"<= 2^{self.log2_bound}" if self.log2_bound is not None else "unknown"


UNIT_SCALE = ScaleClass(EXACT_ONE, Fraction(0))


@dataclass(frozen=True)
class AmplitudeQuery:
    n: int
    query: Callable[[str], ExactValue]
    scale: ScaleClass = UNIT_SCALE
    codomain: ClassDescriptor = ClassDescriptor('C', 1)
    label: str = ''

    def __call__(self, x: str) -> ExactValue:
        if len(x) != self.n:
            raise ValueError(f"{self.label or 'query'} takes {self.n}-bit strings, got {len(x)} bits")
        return self.query(x)


@dataclass(frozen=True)
class SubsetSpec:
    n: int
    membership: Callable[[str], bool]
    cardinality: Optional[int] = None
    label: str = ''

    @classmethod
    def from_members(cls, n: int, members: Iterable[str]) -> 'SubsetSpec':
        chosen: FrozenSet[str] = frozenset(members)
        for x in chosen:
            if len(x) != n or set(x) - {'0', '1'}:
                raise ValueError(f"{x!r} is not an {n}-bit string")
        return cls(n, chosen.__contains__, len(chosen), f"subset{sorted(chosen)}")

    @classmethod
    def from_pattern(cls, pattern: str) -> 'SubsetSpec':
        """Fixed bits with '*' wildcards, e.g. '10**' = {1000, 1001, 1010, 1011}."""
        if set(pattern) - {'0', '1', '*'}:
            raise ValueError(f"bad pattern {pattern!r}")
        fixed = [(i, ch) for i, ch in enumerate(pattern) if ch != '*']

        def membership(x: str) -> bool:
            return all(x[i] == ch for i, ch in fixed)

        return cls(len(pattern), membership, 2 ** pattern.count('*'), f"pattern {pattern}")

    @classmethod
    def product(cls, a: 'SubsetSpec', b: 'SubsetSpec') -> 'SubsetSpec':
        card = a.cardinality * b.cardinality if a.cardinality is not None and b.cardinality is not None else None
        return cls(a.n + b.n, lambda x: a.membership(x[:a.n]) and b.membership(x[a.n:]), card,
                   f"{a.label} x {b.label}")

    def members(self) -> Iterator[str]:
        return (x for x in basis_strings(self.n) if self.membership(x))


@dataclass(frozen=True)
class HybridSpec:
    """Per-step supports of a history state: base subset, K steps and their gates."""
    base: SubsetSpec
    steps: int
    gates: CircuitDescriptor
    stec: Optional[StecDescriptor] = None

    @classmethod
    def for_circuit(cls, c, x: str, xi: str = '') -> 'HybridSpec':
        """Base {x} x {xi} x {0}^m x {0,1}^p laid out by the circuit's roles."""
        stec = c if isinstance(c, StecDescriptor) else None
        circuit = c.expanded if stec else c
        roles = circuit.roles
        if len(x) != roles.count('x') or len(xi) != roles.count('w'):
            raise ValueError(f"input/proof lengths {len(x)}/{len(xi)} do not match roles {roles!r}")
        inputs, proofs = iter(x), iter(xi)
        pattern = ''.join(next(inputs) if r == 'x' else next(proofs) if r == 'w' else '0' if r == '0' else '*'
                          for r in roles)
        return cls(SubsetSpec.from_pattern(pattern), circuit.K, circuit, stec)

    @property
    def total_qubits(self) -> int:
        return self.gates.M + self.steps


def _product_class(a: ClassDescriptor, b: ClassDescriptor) -> ClassDescriptor:
    family = max(a.family, b.family, key=_FAMILY_ORDER.index)
    flags = dict(a.flags)
    for name, width in b.flags:
        flags[name] = max(width, flags.get(name, 0))
    if family != 'C':
        flags.pop('omega', None)
        if flags.get('sqrt') == 2:
            flags['sqrt'] = 1
    return ClassDescriptor(family, a.p + b.p, tuple(flags.items()))


def _complex_class(a: ClassDescriptor, *extra: Tuple[str, int]) -> ClassDescriptor:
    flags = dict(a.flags)
    flags.update(extra)
    return ClassDescriptor('C', a.p, tuple(flags.items()))


def subset_query(S: SubsetSpec, exact_amplitude: bool = False) -> AmplitudeQuery:
    if exact_amplitude:
        if S.cardinality is None:
            raise CardinalityUnknown(f"{S.label or 'subset'} has no declared cardinality")
        amplitude = ExactValue.sqrt(Fraction(1, S.cardinality))

        def query(x: str) -> ExactValue:
            return amplitude if S.membership(x) else EXACT_ZERO

        codomain = ClassDescriptor('Qplus', max(1, S.cardinality.bit_length()), (('sqrt', 1),))
        return AmplitudeQuery(S.n, query, UNIT_SCALE, codomain, f"|{S.label}> exact")

    def membership(x: str) -> ExactValue:
        return EXACT_ONE if S.membership(x) else EXACT_ZERO

    scale = ScaleClass(ExactValue.sqrt(S.cardinality) if S.cardinality is not None else None,
                       Fraction(S.n, 2))
    return AmplitudeQuery(S.n, membership, scale, ClassDescriptor('N', 1), f"|{S.label}>")


def tensor(a: AmplitudeQuery, b: AmplitudeQuery) -> AmplitudeQuery:
    def query(x: str) -> ExactValue:
        left = a(x[:a.n])
        if left.is_zero:
            return EXACT_ZERO
        return left * b(x[a.n:])

    return AmplitudeQuery(a.n + b.n, query, a.scale.times(b.scale),
                          _product_class(a.codomain, b.codomain), f"{a.label} (x) {b.label}")


def zero_pad(a: AmplitudeQuery, m: int) -> AmplitudeQuery:
    return tensor(a, subset_query(SubsetSpec.from_members(m, ['0' * m])))


def pushforward_reversible(a: AmplitudeQuery, gates: CircuitDescriptor, k: Optional[int] = None) -> AmplitudeQuery:
    """Query of R_k...R_1|a>: every classical gate is its own inverse."""
    k = gates.K if k is None else k
    prefix = gates.gates[:k]
    for gate in prefix:
        if not gate.is_classical:
            raise NonClassicalGate(f"{gate} at position {gate.position} is not a classical permutation")
    undo = tuple(reversed(prefix))

    def query(x: str) -> ExactValue:
        for gate in undo:
            x = gate.apply_classical(x)
        return a(x)

    return AmplitudeQuery(a.n, query, a.scale, a.codomain, f"R[1..{k}]{a.label}")


def pushforward_hadamard(a: AmplitudeQuery, q: int) -> AmplitudeQuery:
    i = q - 1

    def query(x: str) -> ExactValue:
        zero = a(x[:i] + '0' + x[i + 1:])
        one = a(x[:i] + '1' + x[i + 1:])
        total = zero + one if x[i] == '0' else zero - one
        return total.with_tags(sqrt_half=1)

    return AmplitudeQuery(a.n, query, a.scale, _complex_class(a.codomain, ('sqrthalf', 4)),
                          f"H[{q}]{a.label}")


def pushforward_hadamard_sequence(a: AmplitudeQuery, qubits: Sequence[int]) -> AmplitudeQuery:
    """H on each listed qubit; costs 2^len(qubits) calls to the input query."""
    for q in qubits:
        a = pushforward_hadamard(a, q)
    return a


def pushforward_phase_sequence(a: AmplitudeQuery, ops: Sequence[Tuple[int, bool]]) -> AmplitudeQuery:
    """Diagonal T / T-dagger string: one omega exponent, the signed weight of x on ops."""
    ops = tuple(ops)

    def query(x: str) -> ExactValue:
        exponent = sum((-1 if dagger else 1) for q, dagger in ops if x[q - 1] == '1') % 8
        return a(x).with_tags(omega=exponent)

    names = ''.join(f"{'Tdg' if d else 'T'}[{q}]" for q, d in ops)
    return AmplitudeQuery(a.n, query, a.scale, _complex_class(a.codomain, ('omega', 3)), f"{names}{a.label}")


def pushforward_phase(a: AmplitudeQuery, q: int, dagger: bool = False) -> AmplitudeQuery:
    return pushforward_phase_sequence(a, [(q, dagger)])


def pushforward_circuit(a: AmplitudeQuery, c: CircuitDescriptor,
                        hadamard_cap: int = HADAMARD_CAP) -> AmplitudeQuery:
    """Mixed gate sequence, gate by gate, with the Hadamard count capped."""
    if c.count('H') > hadamard_cap:
        raise HadamardBudgetExceeded(f"{c.count('H')} Hadamards exceed the cap of {hadamard_cap}")
    for gate in c.gates:
        if gate.kind == 'H':
            a = pushforward_hadamard(a, gate.qubits[0])
        elif gate.kind in ('T', 'TDG'):
            a = pushforward_phase(a, gate.qubits[0], gate.kind == 'TDG')
        else:
            a = pushforward_reversible(a, CircuitDescriptor(c.registers, (gate,), c.roles))
    return a


def _history_norm(h: HybridSpec) -> int:
    if h.base.cardinality is None:
        raise CardinalityUnknown("history states need |S| for their normalization")
    return h.base.cardinality * (h.steps + 1)


def _history_scale(h: HybridSpec, exact_amplitude: bool) -> Tuple[ScaleClass, Optional[ExactValue]]:
    size = _history_norm(h)
    if exact_amplitude:
        return UNIT_SCALE, ExactValue.sqrt(Fraction(1, size))
    return ScaleClass(ExactValue.sqrt(size), Fraction(h.gates.M, 2)), None


def history_query_classical(h: HybridSpec, exact_amplitude: bool = False) -> AmplitudeQuery:
    """
    History state of a classical circuit over data y and unary clock z: the
    amplitude at y||z is nonzero iff z = 1^k 0^(K-k) and R_1...R_k undoes y into S.
    """
    c = h.gates
    if not c.is_classical:
        bad = next(g for g in c.gates if not g.is_classical)
        raise NonClassicalGate(f"{bad} at position {bad.position} in a classical history state")
    M = c.M
    scale, amplitude = _history_scale(h, exact_amplitude)
    hit = amplitude if exact_amplitude else EXACT_ONE

    def query(x: str) -> ExactValue:
        y, z = x[:M], x[M:]
        try:
            k = clock_step(z)
        except BadClockWord as exc:
            logger.debug("%s", exc)
            return EXACT_ZERO
        for gate in reversed(c.gates[:k]):
            y = gate.apply_classical(y)
        return hit if h.base.membership(y) else EXACT_ZERO

    if exact_amplitude:
        codomain = ClassDescriptor('Qplus', _history_norm(h).bit_length(), (('sqrt', 1),))
    else:
        codomain = ClassDescriptor('N', 1)
    return AmplitudeQuery(M + h.steps, query, scale, codomain, f"eta[{h.steps} steps]")


def _pull_back(terms: Dict[str, ExactValue], gate: Gate) -> Dict[str, ExactValue]:
    """Row vector sum_y c_y <y| times gate, as a new sparse row vector."""
    if gate.is_classical:
        return {gate.apply_classical(y): v for y, v in terms.items()}
    i = gate.qubits[0] - 1
    if gate.kind in ('T', 'TDG'):
        phase = OMEGA if gate.kind == 'T' else OMEGA_DAGGER
        return {y: (v * phase if y[i] == '1' else v) for y, v in terms.items()}
    out: Dict[str, ExactValue] = {}
    for y, v in terms.items():
        scaled = v * SQRT_HALF
        for bit in '01':
            target = y[:i] + bit + y[i + 1:]
            term = -scaled if (y[i] == '1' and bit == '1') else scaled
            out[target] = out[target] + term if target in out else term
    return {y: v for y, v in out.items() if not v.is_zero}


def back_propagate(y: str, k: int, circuit: CircuitDescriptor, stec: Optional[StecDescriptor] = None,
                   hadamard_cap: int = HADAMARD_CAP) -> Dict[str, ExactValue]:
    """
    <y| U_k...U_1 as a sparse row vector.  With block tracking, completed
    15-gate blocks act as classical Toffolis and only the open block branches.
    """
    if stec is not None:
        blocks, _ = StecDescriptor.split_prefix(k)
        open_gates = circuit.gates[blocks * BLOCK_LENGTH:k]
        closed = stec.base.gates[:blocks]
    else:
        open_gates = circuit.gates[:k]
        closed = ()
    hadamards = sum(1 for g in open_gates if g.kind == 'H')
    if hadamards > hadamard_cap:
        raise HadamardBudgetExceeded(f"prefix of {k} gates holds {hadamards} Hadamards (cap {hadamard_cap})")
    terms = {y: EXACT_ONE}
    for gate in reversed(open_gates):
        terms = _pull_back(terms, gate)
    for gate in reversed(closed):
        terms = {gate.apply_classical(s): v for s, v in terms.items()}
    return terms


def history_query_stec(h: HybridSpec, hadamard_cap: int = HADAMARD_CAP,
                       exact_amplitude: bool = False) -> AmplitudeQuery:
    """History state of a Clifford+T circuit, resolved branch by branch."""
    c = h.gates
    M = c.M
    scale, amplitude = _history_scale(h, exact_amplitude)

    def query(x: str) -> ExactValue:
        y, z = x[:M], x[M:]
        try:
            k = clock_step(z)
        except BadClockWord as exc:
            logger.debug("%s", exc)
            return EXACT_ZERO
        terms = back_propagate(y, k, c, h.stec, hadamard_cap)
        total = EXACT_ZERO
        for s, coefficient in terms.items():
            if h.base.membership(s):
                total = total + coefficient
        return total * amplitude if exact_amplitude else total

    codomain = ClassDescriptor('C', max(1, _history_norm(h).bit_length()), (('sqrt', 1),))
    return AmplitudeQuery(M + h.steps, query, scale, codomain, f"eta-stec[{h.steps} steps]")


def hybrid_as_subset(h: HybridSpec) -> SubsetSpec:
    """The union of per-step supports as one subset of size (K+1)|S|."""
    history = history_query_classical(h)
    return SubsetSpec(h.total_qubits, lambda x: not history(x).is_zero, _history_norm(h),
                      f"hybrid[{h.steps} steps]")


def split_real(a: AmplitudeQuery) -> Tuple[AmplitudeQuery, AmplitudeQuery]:
    """Real states on n+1 qubits: phi(j||0) = Re a(j), phi(j||1) = +/- Im a(j)."""

    def half(sign: int) -> Callable[[str], ExactValue]:
        def query(x: str) -> ExactValue:
            value = a(x[:-1])
            if x[-1] == '0':
                return value.real()
            part = value.imag()
            return part if sign > 0 else -part
        return query

    codomain = ClassDescriptor('Q', a.codomain.p, tuple(f for f in a.codomain.flags if f[0] != 'omega'))
    return (AmplitudeQuery(a.n + 1, half(1), a.scale, codomain, f"phi+({a.label})"),
            AmplitudeQuery(a.n + 1, half(-1), a.scale, codomain, f"phi-({a.label})"))


def overlap_product_state(a: AmplitudeQuery, sigma: Sequence[Tuple[ExactValue, ExactValue]],
                          budget: int = OVERLAP_QUERY_BUDGET) -> ExactValue:
    """
    c * <sigma|psi> for a product state sigma = (x)_l (s_l0|0> + s_l1|1>),
    using one query per string with a nonzero product coefficient.
    """
    if len(sigma) != a.n:
        raise ValueError(f"sigma has {len(sigma)} slots for a {a.n}-qubit state")
    choices: List[List[Tuple[str, ExactValue]]] = []
    calls = 1
    for v0, v1 in sigma:
        slot = [(bit, v.conjugate()) for bit, v in (('0', v0), ('1', v1)) if not v.is_zero]
        choices.append(slot)
        calls *= len(slot)
    if calls > budget:
        raise CostExceeded(f"overlap needs {calls} queries, budget is {budget}")
    total = EXACT_ZERO
    for combo in itertools.product(*choices):
        if not combo and a.n:
            break
        coefficient = EXACT_ONE
        for _, v in combo:
            coefficient = coefficient * v
        total = total + coefficient * a(''.join(bit for bit, _ in combo))
    logger.debug("overlap with %s used %d queries", a.label, calls)
    return total


def amp_ratio(a: AmplitudeQuery, x: str, y: str) -> ExactValue:
    """alpha(x)/alpha(y) from two queries; the scale cancels."""
    denominator = a(y)
    if denominator.is_zero:
        raise ZeroDenominatorAmplitude(f"{a.label or 'state'} vanishes at {y}")
    numerator = a(x)
    try:
        value, _ = ratio(numerator, denominator, a.codomain)
    except (FlagMismatch, OutOfRange):
        # tags or sizes outside the declared codomain layout
        return numerator / denominator
    return value


def table_query(n: int, amplitudes: Mapping[str, ExactValue], label: str = 'table') -> AmplitudeQuery:
    """Explicit amplitude table; strings not listed have amplitude 0."""
    table = {x: v for x, v in amplitudes.items() if not v.is_zero}
    for x in table:
        if len(x) != n:
            raise ValueError(f"{x!r} is not an {n}-bit string")
    norm2 = EXACT_ZERO
    for v in table.values():
        norm2 = norm2 + v.abs2()
    scale = ScaleClass(sqrt_of(norm2) if norm2.is_rational else None, None)
    codomain = ClassDescriptor('C', 1)
    return AmplitudeQuery(n, lambda x: table.get(x, EXACT_ZERO), scale, codomain, label)
