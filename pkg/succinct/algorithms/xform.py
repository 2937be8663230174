"""
Sparse Hamiltonians behind query access, and the transforms that keep query access:
complex -> real doubling, real -> fixed-node stoquastization, and the sign gauge.

A SparseHam is a pair of queries: entry(x, y) for one matrix element and
row_support(x) for the columns of row x that are nonzero, both exact.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import ComplexEntries, ZeroAmplitudeVisited
from .exactnum import EXACT_ZERO, INTERVAL_FALLBACK_BITS, ExactValue, IntervalValue, exact_sum
from .qstate import AmplitudeQuery

logger = logging.getLogger(__name__)

# Configuration
AMPLITUDE_CACHE_SIZE = 1 << 16

Matrix = Mapping[Tuple[str, str], ExactValue]


@dataclass(frozen=True)
class SparseHam:
    n: int
    entry: Callable[[str, str], ExactValue]
    row_support: Callable[[str], Sequence[str]]
    locality_hint: Optional[int] = None
    real: bool = False
    label: str = ''

    def row(self, x: str) -> Dict[str, ExactValue]:
        out = {}
        for y in self.row_support(x):
            value = self.entry(x, y)
            if not _is_zero(value):
                out[y] = value
        return out

    def apply(self, state: Mapping[str, ExactValue]) -> Dict[str, ExactValue]:
        """H times a sparse vector; row supports are symmetric for Hermitian H."""
        rows = set()
        for y in state:
            rows.update(self.row_support(y))
        out = {}
        for x in sorted(rows):
            total = EXACT_ZERO
            for y, value in self.row(x).items():
                if y in state:
                    total = total + value * state[y]
            if not total.is_zero:
                out[x] = total
        return out

    @classmethod
    def from_dense(cls, n: int, matrix: Matrix, label: str = 'dense') -> 'SparseHam':
        entries = {key: v for key, v in matrix.items() if not v.is_zero}
        rows: Dict[str, List[str]] = {}
        for x, y in sorted(entries):
            rows.setdefault(x, []).append(y)
        real = all(v.is_real for v in entries.values())

        def entry(x: str, y: str) -> ExactValue:
            return entries.get((x, y), EXACT_ZERO)

        return cls(n, entry, lambda x: tuple(rows.get(x, ())), None, real, label)

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[Tuple[Tuple[int, ...], Matrix]],
                   label: str = 'terms') -> 'SparseHam':
        """
        Sum of local terms, each a support (1-based qubits) and an exact matrix keyed
        by local bit strings.  Entry queries add the terms whose support covers every
        differing bit; row queries flip bits inside term supports.
        """
        indexed = []
        for support, matrix in terms:
            by_row: Dict[str, List[Tuple[str, ExactValue]]] = {}
            for (a, b), value in matrix.items():
                if not value.is_zero:
                    by_row.setdefault(a, []).append((b, value))
            indexed.append((tuple(support), dict(matrix), by_row))
        locality = max((len(s) for s, _, _ in indexed), default=0)
        real = all(v.is_real for _, m, _ in indexed for v in m.values())

        def local(x: str, support: Tuple[int, ...]) -> str:
            return ''.join(x[q - 1] for q in support)

        def entry(x: str, y: str) -> ExactValue:
            differing = {i + 1 for i, (a, b) in enumerate(zip(x, y)) if a != b}
            total = EXACT_ZERO
            for support, matrix, _ in indexed:
                if differing.issubset(support):
                    value = matrix.get((local(x, support), local(y, support)))
                    if value is not None:
                        total = total + value
            return total

        def row_support(x: str) -> Tuple[str, ...]:
            candidates = set()
            for support, _, by_row in indexed:
                for b, _ in by_row.get(local(x, support), ()):
                    y = list(x)
                    for q, bit in zip(support, b):
                        y[q - 1] = bit
                    candidates.add(''.join(y))
            return tuple(sorted(y for y in candidates if not entry(x, y).is_zero))

        return cls(n, entry, row_support, locality, real, label)


def _is_zero(value) -> bool:
    if isinstance(value, IntervalValue):
        return value.sign() == 0
    return value.is_zero


def hermiticity_spot_check(H: SparseHam, rows: Iterable[str]) -> bool:
    """Exact H(x,y) = conj(H(y,x)) plus symmetric row supports, on the given rows."""
    for x in rows:
        for y in H.row_support(x):
            if H.entry(y, x) != H.entry(x, y).conjugate() or x not in H.row_support(y):
                logger.warning("%s fails Hermiticity at (%s, %s)", H.label, x, y)
                return False
    return True


def complexify_to_real(H: SparseHam) -> SparseHam:
    """
    Real operator on n+1 qubits (last qubit u) with blocks [[A, -B], [B, A]] for
    H = A + iB.  Its spectrum is every eigenvalue of H twice.
    """
    def entry(xu: str, yv: str) -> ExactValue:
        value = H.entry(xu[:-1], yv[:-1])
        u, v = xu[-1], yv[-1]
        if u == v:
            return value.real()
        return -value.imag() if u == '0' else value.imag()

    def row_support(xu: str) -> Tuple[str, ...]:
        x, u = xu[:-1], xu[-1]
        flipped = '1' if u == '0' else '0'
        out = []
        for y, value in H.row(x).items():
            if not value.real().is_zero:
                out.append(y + u)
            if not value.imag().is_zero:
                out.append(y + flipped)
        return tuple(sorted(out))

    hint = H.locality_hint + 1 if H.locality_hint is not None else None
    return SparseHam(H.n + 1, entry, row_support, hint, True, f"real({H.label})")


@dataclass(frozen=True)
class FixedNodePartition:
    """Sign classes of off-diagonal pairs with respect to a real trial state."""
    xi: AmplitudeQuery
    H: SparseHam

    def classify(self, x: str, y: str) -> str:
        """'P' when alpha(x) H(x,y) alpha(y) > 0, 'N' when <= 0, 'Zero' when H(x,y) = 0."""
        h = self.H.entry(x, y)
        if h.is_zero:
            return 'Zero'
        product = _real_amplitude(self.xi, x) * h * _real_amplitude(self.xi, y)
        return 'P' if product.sign() > 0 else 'N'


def _real_amplitude(xi: AmplitudeQuery, x: str) -> ExactValue:
    value = xi(x)
    if not value.is_real:
        raise ComplexEntries(f"trial state {xi.label} is complex at {x}")
    return value


def fixed_node(H: SparseHam, xi: AmplitudeQuery,
               fallback_bits: Optional[int] = INTERVAL_FALLBACK_BITS) -> SparseHam:
    """
    F(xi, H): off-diagonals in the positive class are dropped and folded into the
    diagonal as (alpha(y)/alpha(x)) H(x,y).  When those ratios carry incompatible
    radicands the diagonal comes back as an IntervalValue.
    """
    alpha = lru_cache(maxsize=AMPLITUDE_CACHE_SIZE)(lambda x: _real_amplitude(xi, x))

    def positive(x: str, y: str, h: ExactValue) -> bool:
        ax, ay = alpha(x), alpha(y)
        if ax.is_zero or ay.is_zero:
            return False
        return (ax * h * ay).sign() > 0

    def entry(x: str, y: str):
        if x != y:
            h = H.entry(x, y)
            if h.is_zero or positive(x, y, h):
                return EXACT_ZERO
            return h
        ax = alpha(x)
        if ax.is_zero:
            raise ZeroAmplitudeVisited(f"fixed-node diagonal needs alpha({x}) != 0")
        terms = [H.entry(x, x)]
        for z, h in H.row(x).items():
            if z != x and positive(x, z, h):
                terms.append(alpha(z) / ax * h)
        return exact_sum(terms, fallback_bits)

    def row_support(x: str) -> Tuple[str, ...]:
        out = []
        for y, h in H.row(x).items():
            if y != x and not positive(x, y, h):
                out.append(y)
        try:
            if not _is_zero(entry(x, x)):
                out.append(x)
        except ZeroAmplitudeVisited:
            logger.debug("row %s lies outside the trial state's support", x)
        return tuple(sorted(out))

    return SparseHam(H.n, entry, row_support, None, True, f"F({xi.label}, {H.label})")


def sign_gauge(F: SparseHam, xi: AmplitudeQuery) -> SparseHam:
    """Conjugation by diag(sgn alpha(x)); an involution."""
    def sign(x: str) -> int:
        s = _real_amplitude(xi, x).sign()
        if s == 0:
            raise ZeroAmplitudeVisited(f"sign gauge needs alpha({x}) != 0")
        return s

    def entry(x: str, y: str):
        value = F.entry(x, y)
        if x == y or sign(x) == sign(y):
            return value
        return -value

    return SparseHam(F.n, entry, F.row_support, F.locality_hint, F.real, f"gauge({F.label})")
