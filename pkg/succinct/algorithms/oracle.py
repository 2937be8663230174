"""
Brute-force ground truth at desk scale.

States are kept as sparse maps {bit string: exact amplitude}, so simulation stays
exact and only touches the strings a circuit actually reaches.  Hamiltonians are
reconstructed entry by entry and handed to numpy only for eigenvalues.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .circuit import CircuitDescriptor, Gate
from .errors import (CapExceeded, ComplexEntries, ConvergenceFailure, InconsistentScale,
                     RowSupportMismatch)
from .exactnum import EXACT_ONE, EXACT_ZERO, ExactValue, IntervalValue, sqrt_of
from .qstate import OMEGA, OMEGA_DAGGER, SQRT_HALF, AmplitudeQuery, basis_strings
from .xform import SparseHam

logger = logging.getLogger(__name__)

# Configuration
ORACLE_QUBIT_CAP = 14
SPECTRUM_RESIDUAL_TOL = 1e-9
FULL_ROW_CHECK_QUBITS = 6


def _check_cap(n: int, cap: int, what: str):
    if n > cap:
        raise CapExceeded(f"{what} on {n} qubits exceeds the oracle cap of {cap}")


@dataclass(frozen=True)
class DenseState:
    n: int
    amplitudes: Mapping[str, ExactValue] = field(default_factory=dict)

    @classmethod
    def of(cls, n: int, amplitudes: Mapping[str, ExactValue]) -> 'DenseState':
        return cls(n, {x: v for x, v in amplitudes.items() if not v.is_zero})

    @classmethod
    def basis(cls, x: str) -> 'DenseState':
        return cls(len(x), {x: EXACT_ONE})

    def __getitem__(self, x: str) -> ExactValue:
        return self.amplitudes.get(x, EXACT_ZERO)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseState):
            return NotImplemented
        return self.n == other.n and dict(self.amplitudes) == dict(other.amplitudes)

    def vector(self) -> List[ExactValue]:
        return [self[x] for x in basis_strings(self.n)]

    def norm_squared(self) -> ExactValue:
        total = EXACT_ZERO
        for v in self.amplitudes.values():
            total = total + v.abs2()
        return total

    def inner(self, other: 'DenseState') -> ExactValue:
        """<self|other>."""
        total = EXACT_ZERO
        for x, v in self.amplitudes.items():
            if x in other.amplitudes:
                total = total + v.conjugate() * other.amplitudes[x]
        return total

    def scaled(self, c: ExactValue) -> 'DenseState':
        return DenseState.of(self.n, {x: v * c for x, v in self.amplitudes.items()})

    def kron(self, other: 'DenseState') -> 'DenseState':
        return DenseState.of(self.n + other.n, {x + y: a * b for x, a in self.amplitudes.items()
                                                for y, b in other.amplitudes.items()})

    def to_numpy(self) -> np.ndarray:
        out = np.zeros(2 ** self.n, dtype=complex)
        for x, v in self.amplitudes.items():
            out[int(x, 2)] = v.to_complex()
        return out


@dataclass(frozen=True)
class DenseHam:
    n: int
    entries: Mapping[Tuple[str, str], ExactValue] = field(default_factory=dict)

    def __getitem__(self, key: Tuple[str, str]) -> ExactValue:
        return self.entries.get(key, EXACT_ZERO)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseHam):
            return NotImplemented
        return self.n == other.n and dict(self.entries) == dict(other.entries)

    def is_hermitian(self) -> bool:
        return all(self[(y, x)] == v.conjugate() for (x, y), v in self.entries.items())

    def apply(self, state: DenseState) -> DenseState:
        out: Dict[str, ExactValue] = {}
        for (x, y), v in self.entries.items():
            if y in state.amplitudes:
                term = v * state.amplitudes[y]
                out[x] = out[x] + term if x in out else term
        return DenseState.of(self.n, out)

    def to_numpy(self, basis: Optional[Sequence[str]] = None) -> np.ndarray:
        basis = list(basis) if basis is not None else list(basis_strings(self.n))
        index = {x: i for i, x in enumerate(basis)}
        out = np.zeros((len(basis), len(basis)), dtype=complex)
        for (x, y), v in self.entries.items():
            if x in index and y in index:
                out[index[x], index[y]] = v.to_complex()
        return out


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float
    norm: float
    basis: Tuple[str, ...]

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0]) if len(self.eigenvalues) > 1 else float('inf')


def _apply_gate(amplitudes: Dict[str, ExactValue], gate: Gate) -> Dict[str, ExactValue]:
    if gate.is_classical:
        return {gate.apply_classical(x): v for x, v in amplitudes.items()}
    i = gate.qubits[0] - 1
    if gate.kind in ('T', 'TDG'):
        phase = OMEGA if gate.kind == 'T' else OMEGA_DAGGER
        return {x: (v * phase if x[i] == '1' else v) for x, v in amplitudes.items()}
    out: Dict[str, ExactValue] = {}
    for x, v in amplitudes.items():
        scaled = v * SQRT_HALF
        for bit in '01':
            y = x[:i] + bit + x[i + 1:]
            term = -scaled if x[i] == '1' and bit == '1' else scaled
            out[y] = out[y] + term if y in out else term
    return {x: v for x, v in out.items() if not v.is_zero}


def simulate(c: CircuitDescriptor, init: DenseState, cap: int = ORACLE_QUBIT_CAP) -> DenseState:
    """Exact state vector after every gate of c."""
    _check_cap(c.M, cap, "simulation")
    if init.n != c.M:
        raise ValueError(f"initial state has {init.n} qubits, circuit has {c.M}")
    amplitudes = dict(init.amplitudes)
    for gate in c.gates:
        amplitudes = _apply_gate(amplitudes, gate)
    return DenseState(c.M, amplitudes)


def initial_state(c: CircuitDescriptor, x: str = '', xi: str = '') -> DenseState:
    """|x>|xi>|0..0>|+..+> laid out by the circuit's roles."""
    roles = c.roles
    if len(x) != roles.count('x') or len(xi) != roles.count('w'):
        raise ValueError(f"input/proof lengths {len(x)}/{len(xi)} do not match roles {roles!r}")
    plus = roles.count('+')
    amplitude = ExactValue(re=EXACT_ONE.re, sqrt_half_power=plus).canonical()
    out = {}
    for coins in basis_strings(plus):
        inputs, proofs, flips = iter(x), iter(xi), iter(coins)
        bits = ''.join(next(inputs) if r == 'x' else next(proofs) if r == 'w' else '0' if r == '0'
                       else next(flips) for r in roles)
        out[bits] = amplitude
    return DenseState(c.M, out)


def accept_probability(c: CircuitDescriptor, init: DenseState, cap: int = ORACLE_QUBIT_CAP) -> ExactValue:
    """<phi|U^dag Pi_out U|phi> with Pi_out = |1><1| on the output qubit."""
    final = simulate(c, init, cap)
    q = c.output_qubit - 1
    total = EXACT_ZERO
    for x, v in final.amplitudes.items():
        if x[q] == '1':
            total = total + v.abs2()
    return total


def densify_state(a: AmplitudeQuery, reference: Optional[DenseState] = None,
                  cap: int = ORACLE_QUBIT_CAP) -> Tuple[DenseState, ExactValue]:
    """
    Every amplitude of a query and the common scale c.  With a reference state,
    c must make query(x) = c * reference[x] for all x; otherwise c is the exact norm
    and must agree with the query's declared scale when it has one.
    """
    _check_cap(a.n, cap, "densify")
    raw = {}
    for x in basis_strings(a.n):
        value = a(x)
        if not value.is_zero:
            raw[x] = value
    if not raw:
        raise InconsistentScale(f"{a.label or 'query'} is zero on every string")

    if reference is not None:
        anchor = next(iter(raw))
        if reference[anchor].is_zero:
            raise InconsistentScale(f"query is nonzero at {anchor} where the reference vanishes")
        c = raw[anchor] / reference[anchor]
        if not c.is_real or c.sign() <= 0:
            raise InconsistentScale(f"ratio at {anchor} is {c}, not a positive scale")
        for x in set(raw) | set(reference.amplitudes):
            if raw.get(x, EXACT_ZERO) != c * reference[x]:
                raise InconsistentScale(f"no single scale explains the amplitude at {x}")
        return DenseState(a.n, {x: v / c for x, v in raw.items()}), c

    norm2 = EXACT_ZERO
    for v in raw.values():
        norm2 = norm2 + v.abs2()
    declared = a.scale.value
    if declared is not None:
        if declared * declared != norm2:
            raise InconsistentScale(f"declared scale {declared} squares to {declared * declared}, "
                                    f"query norm is {norm2}")
        c = declared
    elif norm2.is_rational:
        c = sqrt_of(norm2)
    else:
        logger.warning("norm %s of %s has no exact square root; returning it unnormalized", norm2, a.label)
        return DenseState(a.n, raw), EXACT_ONE
    return DenseState(a.n, {x: v / c for x, v in raw.items()}), c


def densify_ham(H: SparseHam, cap: int = ORACLE_QUBIT_CAP,
                full_check_qubits: int = FULL_ROW_CHECK_QUBITS) -> DenseHam:
    """Exact matrix of a query Hamiltonian, checking every listed column is nonzero."""
    _check_cap(H.n, cap, "densify")
    entries = {}
    for x in basis_strings(H.n):
        listed = set(H.row_support(x))
        for y in listed:
            value = H.entry(x, y)
            if isinstance(value, IntervalValue):
                raise ConvergenceFailure(f"entry ({x}, {y}) is only known as an interval {value}")
            if value.is_zero:
                raise RowSupportMismatch(f"row {x} lists {y} but the entry is zero")
            entries[(x, y)] = value
        if H.n <= full_check_qubits:
            for y in basis_strings(H.n):
                if y not in listed and not _entry_is_zero(H, x, y):
                    raise RowSupportMismatch(f"row {x} omits nonzero column {y}")
    return DenseHam(H.n, entries)


def _entry_is_zero(H: SparseHam, x: str, y: str) -> bool:
    value = H.entry(x, y)
    if isinstance(value, IntervalValue):
        return value.sign() == 0
    return value.is_zero


def spectrum(H: DenseHam, basis: Optional[Sequence[str]] = None,
             tolerance: float = SPECTRUM_RESIDUAL_TOL) -> Spectrum:
    """numpy eigh of H restricted to basis (all strings by default), residual-checked."""
    basis = tuple(basis) if basis is not None else tuple(basis_strings(H.n))
    matrix = H.to_numpy(basis)
    try:
        values, vectors = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigh failed: {exc}") from exc
    norm = float(np.linalg.norm(matrix, 2)) if matrix.size else 0.0
    residual = float(np.max(np.linalg.norm(matrix @ vectors - vectors * values, axis=0))) if matrix.size else 0.0
    if residual > tolerance * max(norm, 1.0):
        raise ConvergenceFailure(f"eigen residual {residual:.3e} exceeds {tolerance:g} * |H| = {norm:.3e}")
    return Spectrum(values, vectors, residual, norm, basis)


def ground_state(H: DenseHam, basis: Optional[Sequence[str]] = None) -> Tuple[float, Dict[str, complex]]:
    spec = spectrum(H, basis)
    vector = spec.eigenvectors[:, 0]
    return spec.ground_energy, {x: complex(vector[i]) for i, x in enumerate(spec.basis) if abs(vector[i]) > 1e-12}


def stoquastic_check(H: DenseHam) -> bool:
    """True iff every off-diagonal entry is <= 0, decided exactly."""
    for (x, y), v in H.entries.items():
        if not v.is_real:
            raise ComplexEntries(f"entry ({x}, {y}) = {v} is not real")
    return all(v.sign() <= 0 for (x, y), v in H.entries.items() if x != y)


def restrict(H: DenseHam, predicate: Callable[[str], bool]) -> Tuple[DenseHam, Tuple[str, ...]]:
    """H compressed to the basis strings where predicate holds."""
    basis = tuple(x for x in basis_strings(H.n) if predicate(x))
    kept = set(basis)
    entries = {(x, y): v for (x, y), v in H.entries.items() if x in kept and y in kept}
    return DenseHam(H.n, entries), basis


def apply_sparse(H: SparseHam, state: DenseState) -> DenseState:
    return DenseState.of(state.n, H.apply(state.amplitudes))


def kron_all(states: Iterable[DenseState]) -> DenseState:
    out = DenseState(0, {'': EXACT_ONE})
    for s in states:
        out = out.kron(s)
    return out
