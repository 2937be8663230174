"""
Exact numbers for succinct amplitudes and Hamiltonian entries.

Values live in the ring Q(i)[sqrt 2] with one optional global sqrt(f) multiplier
(f odd and square-free).  A value may also carry the lazy tags that the binary
codecs know about (omega power, 1/sqrt2 power, componentwise sqrt flags); tags are
folded into ring form only when arithmetic needs it.

The codecs implement the fixed-width layouts N_p, Q+_p, Q_p and C_p: optional flag
bits first, then sign bits, then p-bit magnitude blocks, most significant bit first.
"""

import logging
import math
import re
import threading
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import mpmath
from mpmath.libmp import mpf_sign
from sympy.ntheory.factor_ import core

from .errors import (BadWidth, DivideByZero, FlagMismatch, IncompatibleRadicals,
                     OutOfRange, ZeroDenominator)

logger = logging.getLogger(__name__)

# Configuration
HIGH_PRECISION_DPS = 50
INTERVAL_FALLBACK_BITS = 256
DEFAULT_SQRTHALF_WIDTH = 4

FAMILY_WIDTHS = {
    'N': lambda p: p,
    'Qplus': lambda p: 2 * p,
    'Q': lambda p: 2 * p + 2,
    'C': lambda p: 4 * p + 4,
}
FAMILY_ALIASES = {'N': 'N', 'Q+': 'Qplus', 'Qplus': 'Qplus', 'Q': 'Q', 'C': 'C'}
FLAG_NAMES = ('omega', 'sqrt', 'sqrthalf')

Number = Union[int, Fraction, 'ExactValue']


@dataclass(frozen=True)
class SignedRational:
    """A rational kept exactly as written: magnitudes plus separate sign bits."""
    numerator: int
    denominator: int = 1
    numerator_negative: bool = False
    denominator_negative: bool = False

    def __post_init__(self):
        if self.numerator < 0 or self.denominator < 0:
            raise ValueError("SignedRational magnitudes are nonnegative; use the sign fields")
        if self.denominator == 0:
            raise ZeroDenominator("denominator is zero")

    @classmethod
    def of(cls, numerator: int, denominator: int = 1) -> 'SignedRational':
        """Build from signed integers, keeping each sign with its own block."""
        return cls(abs(numerator), abs(denominator), numerator < 0, denominator < 0)

    @classmethod
    def from_fraction(cls, value) -> 'SignedRational':
        value = Fraction(value)
        return cls(abs(value.numerator), value.denominator, value < 0, False)

    @classmethod
    def parse(cls, text: str) -> 'SignedRational':
        m = re.fullmatch(r'([+-]?)(\d+)(?:/([+-]?)(\d+))?', text.strip())
        if not m:
            raise ValueError(f"not a rational literal: {text!r}")
        den = int(m.group(4)) if m.group(4) is not None else 1
        return cls(int(m.group(2)), den, m.group(1) == '-', m.group(3) == '-')

    def to_fraction(self) -> Fraction:
        negative = self.numerator_negative != self.denominator_negative
        value = Fraction(self.numerator, self.denominator)
        return -value if negative else value

    @property
    def is_zero(self) -> bool:
        return self.numerator == 0

    def reduced(self) -> 'SignedRational':
        return SignedRational.from_fraction(self.to_fraction())

    def __str__(self) -> str:
        num = ('-' if self.numerator_negative else '') + str(self.numerator)
        if self.denominator == 1 and not self.denominator_negative:
            return num
        return f"{num}/{'-' if self.denominator_negative else ''}{self.denominator}"


ZERO = SignedRational(0)
ONE = SignedRational(1)


class _Ring(NamedTuple):
    """sqrt(f) * ((a + c*sqrt2) + i*(b + d*sqrt2)) with f odd and square-free."""
    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction
    f: int = 1

    @property
    def is_zero(self) -> bool:
        return not (self.a or self.b or self.c or self.d)


_F0 = Fraction(0)
_RING_ZERO = _Ring(_F0, _F0, _F0, _F0, 1)
_RING_ONE = _Ring(Fraction(1), _F0, _F0, _F0, 1)
_HALF = Fraction(1, 2)

# omega^s = exp(i*pi*s/4) in ring form
_OMEGA_RING = (
    _Ring(Fraction(1), _F0, _F0, _F0),
    _Ring(_F0, _F0, _HALF, _HALF),
    _Ring(_F0, Fraction(1), _F0, _F0),
    _Ring(_F0, _F0, -_HALF, _HALF),
    _Ring(Fraction(-1), _F0, _F0, _F0),
    _Ring(_F0, _F0, -_HALF, -_HALF),
    _Ring(_F0, Fraction(-1), _F0, _F0),
    _Ring(_F0, _F0, _HALF, -_HALF),
)

# the same table in tag form: (re, im, one 1/sqrt2 factor?)
_OMEGA_TAGS = ((1, 0, 0), (1, 1, 1), (0, 1, 0), (-1, 1, 1),
               (-1, 0, 0), (-1, -1, 1), (0, -1, 0), (1, -1, 1))


def _normalize(r: _Ring) -> _Ring:
    return _RING_ZERO if r.is_zero else r


def _cmul(x: Tuple[Fraction, Fraction], y: Tuple[Fraction, Fraction]):
    return (x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0])


def _ring_mul(x: _Ring, y: _Ring) -> _Ring:
    if x.is_zero or y.is_zero:
        return _RING_ZERO
    u1, v1 = (x.a, x.b), (x.c, x.d)
    u2, v2 = (y.a, y.b), (y.c, y.d)
    uu, vv = _cmul(u1, u2), _cmul(v1, v2)
    uv, vu = _cmul(u1, v2), _cmul(v1, u2)
    g = math.gcd(x.f, y.f)
    f = (x.f // g) * (y.f // g)
    return _normalize(_Ring(g * (uu[0] + 2 * vv[0]), g * (uu[1] + 2 * vv[1]),
                            g * (uv[0] + vu[0]), g * (uv[1] + vu[1]), f))


def _ring_add(x: _Ring, y: _Ring) -> _Ring:
    if x.is_zero:
        return y
    if y.is_zero:
        return x
    if x.f != y.f:
        raise IncompatibleRadicals(f"cannot add multiples of sqrt({x.f}) and sqrt({y.f})")
    return _normalize(_Ring(x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d, x.f))


def _ring_neg(x: _Ring) -> _Ring:
    return _normalize(_Ring(-x.a, -x.b, -x.c, -x.d, x.f))


def _ring_conj(x: _Ring) -> _Ring:
    return _normalize(_Ring(x.a, -x.b, x.c, -x.d, x.f))


def _ring_inv(x: _Ring) -> _Ring:
    if x.is_zero:
        raise DivideByZero("division by exact zero")
    u, v = (x.a, x.b), (x.c, x.d)
    # z * sigma(z) = u^2 - 2 v^2 lies in Q(i); sigma flips the sign of sqrt2
    uu, vv = _cmul(u, u), _cmul(v, v)
    w = (uu[0] - 2 * vv[0], uu[1] - 2 * vv[1])
    norm = w[0] * w[0] + w[1] * w[1]
    w_inv = (w[0] / norm, -w[1] / norm)
    p = _cmul(u, w_inv)
    q = _cmul(v, w_inv)
    inverse = _Ring(p[0], p[1], -q[0], -q[1], 1)
    if x.f != 1:
        # 1/sqrt(f) = sqrt(f)/f
        inverse = _Ring(inverse.a / x.f, inverse.b / x.f, inverse.c / x.f, inverse.d / x.f, x.f)
    return _normalize(inverse)


def _rational_ring(re: Fraction, im: Fraction = _F0) -> _Ring:
    return _normalize(_Ring(Fraction(re), Fraction(im), _F0, _F0, 1))


@lru_cache(maxsize=4096)
def _sqrt_ring(q: Fraction) -> _Ring:
    """sqrt(q) for rational q >= 0 in ring form."""
    if q < 0:
        raise ValueError("square root of a negative rational")
    if q == 0:
        return _RING_ZERO
    m = q.numerator * q.denominator
    free = int(core(m))
    s = Fraction(math.isqrt(m // free), q.denominator)
    if free % 2 == 0:
        return _Ring(_F0, _F0, s, _F0, free // 2)
    return _Ring(s, _F0, _F0, _F0, free)


def _signed_sqrt_ring(q: Fraction) -> _Ring:
    root = _sqrt_ring(abs(q))
    return _ring_neg(root) if q < 0 else root


def _sqrt_half_ring(h: int) -> _Ring:
    if h % 2 == 0:
        return _Ring(Fraction(1, 2 ** (h // 2)), _F0, _F0, _F0)
    return _Ring(_F0, _F0, Fraction(1, 2 ** ((h + 1) // 2)), _F0)


def _sign_q2(a: Fraction, c: Fraction) -> int:
    """Exact sign of a + c*sqrt2."""
    sa = (a > 0) - (a < 0)
    sc = (c > 0) - (c < 0)
    if sc == 0:
        return sa
    if sa == 0 or sa == sc:
        return sc if sa == 0 else sa
    return sa if a * a > 2 * c * c else sc


@dataclass(frozen=True, eq=False)
class ExactValue:
    """
    An exact amplitude or matrix entry.

    re/im are the rational parts, re2/im2 the coefficients of sqrt2.  With a sqrt
    flag set, the matching component stands for sgn(q)*sqrt(|q|) of its rational q
    (componentwise semantics).  omega_power multiplies by exp(i*pi*s/4),
    sqrt_half_power by (1/sqrt2)^h and symbolic_sqrt by sqrt(r).
    """
    re: SignedRational = ZERO
    im: SignedRational = ZERO
    re2: SignedRational = ZERO
    im2: SignedRational = ZERO
    omega_power: Optional[int] = None
    sqrt_half_power: int = 0
    sqrt_flag_re: bool = False
    sqrt_flag_im: bool = False
    symbolic_sqrt: Optional[Fraction] = None

    def __post_init__(self):
        if self.sqrt_half_power < 0:
            raise ValueError("sqrt_half_power must be nonnegative")
        if (self.sqrt_flag_re or self.sqrt_flag_im) and not (self.re2.is_zero and self.im2.is_zero):
            raise ValueError("sqrt flags apply to the rational parts only")
        if self.symbolic_sqrt is not None and self.symbolic_sqrt <= 0:
            raise ValueError("symbolic sqrt multiplier must be positive")

    # construction

    @classmethod
    def of(cls, re: Union[int, Fraction, str] = 0, im: Union[int, Fraction, str] = 0) -> 'ExactValue':
        return cls(re=SignedRational.from_fraction(Fraction(re)),
                   im=SignedRational.from_fraction(Fraction(im)))

    @classmethod
    def sqrt(cls, q) -> 'ExactValue':
        """sqrt(q) for a nonnegative rational, kept as a flagged value."""
        q = Fraction(q)
        if q < 0:
            raise ValueError("sqrt of a negative rational")
        return cls(re=SignedRational.from_fraction(q), sqrt_flag_re=True)

    @classmethod
    def _from_ring(cls, r: _Ring) -> 'ExactValue':
        value = cls(re=SignedRational.from_fraction(r.a), im=SignedRational.from_fraction(r.b),
                    re2=SignedRational.from_fraction(r.c), im2=SignedRational.from_fraction(r.d),
                    symbolic_sqrt=Fraction(r.f) if r.f != 1 else None)
        value.__dict__['ring'] = r
        return value

    @staticmethod
    def coerce(value: Number) -> 'ExactValue':
        if isinstance(value, ExactValue):
            return value
        if isinstance(value, (int, Fraction)):
            return ExactValue.of(value)
        raise TypeError(f"cannot use {type(value).__name__} as an exact value")

    # ring view

    @cached_property
    def ring(self) -> _Ring:
        if self.sqrt_flag_re or self.sqrt_flag_im:
            re = self.re.to_fraction()
            im = self.im.to_fraction()
            re_part = _signed_sqrt_ring(re) if self.sqrt_flag_re else _rational_ring(re)
            im_part = _signed_sqrt_ring(im) if self.sqrt_flag_im else _rational_ring(im)
            im_part = _ring_mul(im_part, _OMEGA_RING[2])
            base = _ring_add(re_part, im_part)
        else:
            base = _normalize(_Ring(self.re.to_fraction(), self.im.to_fraction(),
                                    self.re2.to_fraction(), self.im2.to_fraction(), 1))
        if self.omega_power:
            base = _ring_mul(base, _OMEGA_RING[self.omega_power % 8])
        if self.sqrt_half_power:
            base = _ring_mul(base, _sqrt_half_ring(self.sqrt_half_power))
        if self.symbolic_sqrt is not None:
            base = _ring_mul(base, _sqrt_ring(self.symbolic_sqrt))
        return base

    def canonical(self) -> 'ExactValue':
        """Tags absorbed, rationals reduced, radicand square-free."""
        return ExactValue._from_ring(self.ring)

    @property
    def is_tagged(self) -> bool:
        return bool(self.omega_power or self.sqrt_half_power or self.sqrt_flag_re
                    or self.sqrt_flag_im or self.symbolic_sqrt is not None)

    @property
    def is_zero(self) -> bool:
        return self.ring.is_zero

    @property
    def is_real(self) -> bool:
        r = self.ring
        return r.b == 0 and r.d == 0

    @property
    def is_rational(self) -> bool:
        r = self.ring
        return r.f == 1 and r.c == 0 and r.d == 0

    def real(self) -> 'ExactValue':
        r = self.ring
        return ExactValue._from_ring(_normalize(_Ring(r.a, _F0, r.c, _F0, r.f)))

    def imag(self) -> 'ExactValue':
        r = self.ring
        return ExactValue._from_ring(_normalize(_Ring(r.b, _F0, r.d, _F0, r.f)))

    def conjugate(self) -> 'ExactValue':
        return ExactValue._from_ring(_ring_conj(self.ring))

    def abs2(self) -> 'ExactValue':
        return self * self.conjugate()

    def sign(self) -> int:
        """Exact sign of a real value."""
        r = self.ring
        if r.b or r.d:
            raise ValueError("sign of a value with an imaginary part")
        return _sign_q2(r.a, r.c)

    def to_fraction(self) -> Fraction:
        r = self.ring
        if r.f != 1 or r.b or r.c or r.d:
            raise ValueError(f"{self} is not rational")
        return r.a

    def with_tags(self, omega: int = 0, sqrt_half: int = 0) -> 'ExactValue':
        """Multiply lazily by omega^omega and (1/sqrt2)^sqrt_half."""
        value = self
        if omega % 8:
            value = replace(value, omega_power=((value.omega_power or 0) + omega) % 8)
        if sqrt_half:
            value = replace(value, sqrt_half_power=value.sqrt_half_power + sqrt_half)
        return value

    # arithmetic

    def __add__(self, other: Number) -> 'ExactValue':
        other = ExactValue.coerce(other)
        return ExactValue._from_ring(_ring_add(self.ring, other.ring))

    __radd__ = __add__

    def __neg__(self) -> 'ExactValue':
        return ExactValue._from_ring(_ring_neg(self.ring))

    def __sub__(self, other: Number) -> 'ExactValue':
        return self + (-ExactValue.coerce(other))

    def __rsub__(self, other: Number) -> 'ExactValue':
        return ExactValue.coerce(other) - self

    def __mul__(self, other: Number) -> 'ExactValue':
        other = ExactValue.coerce(other)
        return ExactValue._from_ring(_ring_mul(self.ring, other.ring))

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> 'ExactValue':
        other = ExactValue.coerce(other)
        return ExactValue._from_ring(_ring_mul(self.ring, _ring_inv(other.ring)))

    def __rtruediv__(self, other: Number) -> 'ExactValue':
        return ExactValue.coerce(other) / self

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = ExactValue.of(other)
        if not isinstance(other, ExactValue):
            return NotImplemented
        return self.ring == other.ring

    def __hash__(self) -> int:
        return hash(self.ring)

    def __bool__(self) -> bool:
        return not self.is_zero

    # numerics

    def to_complex(self) -> complex:
        r = self.ring
        root2 = math.sqrt(2.0)
        scale = math.sqrt(r.f)
        return complex(scale * (float(r.a) + float(r.c) * root2),
                       scale * (float(r.b) + float(r.d) * root2))

    def __float__(self) -> float:
        if not self.is_real:
            raise ValueError("float() of a complex value")
        return self.to_complex().real

    def to_mpc(self, dps: int = HIGH_PRECISION_DPS) -> mpmath.mpc:
        r = self.ring
        with mpmath.workdps(dps):
            root2 = mpmath.sqrt(2)
            scale = mpmath.sqrt(r.f)

            def q(x: Fraction):
                return mpmath.mpf(x.numerator) / x.denominator

            return mpmath.mpc(scale * (q(r.a) + q(r.c) * root2), scale * (q(r.b) + q(r.d) * root2))

    def __repr__(self) -> str:
        return f"ExactValue({self})"

    def __str__(self) -> str:
        prefix = ''
        if self.symbolic_sqrt is not None:
            prefix += f"sqrt({self.symbolic_sqrt})*"
        if self.omega_power:
            prefix += f"w^{self.omega_power % 8}*"
        if self.sqrt_half_power:
            prefix += f"(1/sqrt2)^{self.sqrt_half_power}*"
        re = f"sqrt({self.re})" if self.sqrt_flag_re else str(self.re)
        im = f"sqrt({self.im})" if self.sqrt_flag_im else str(self.im)
        if not self.re2.is_zero:
            re = f"{re}+{self.re2}*sqrt2"
        if not self.im2.is_zero:
            im = f"{im}+{self.im2}*sqrt2"
        if self.im.is_zero and self.im2.is_zero:
            body = re
        else:
            im_text = f"({im})" if '+' in im[1:] else im
            joiner = '' if im_text.startswith('-') else '+'
            body = f"{re}{joiner}{im_text}i"
        return prefix + (f"({body})" if prefix and ('+' in body[1:] or 'i' in body) else body)


EXACT_ZERO = ExactValue()
EXACT_ONE = ExactValue(re=ONE)


def omega_expand(s: int) -> ExactValue:
    """omega^s in tag form: odd powers carry one 1/sqrt2 factor."""
    if not 0 <= s <= 7:
        raise ValueError("omega power must lie in 0..7")
    re, im, half = _OMEGA_TAGS[s]
    return ExactValue(re=SignedRational.of(re), im=SignedRational.of(im), sqrt_half_power=half)


def arith(a: ExactValue, b: ExactValue, op: str) -> ExactValue:
    """Exact add/mul with the result in canonical form."""
    if op == 'add':
        return a + b
    if op == 'mul':
        return a * b
    raise ValueError(f"unknown operation {op!r}")


def compare(x: ExactValue, y: ExactValue) -> int:
    """Exact sign of x - y for real values, across different radicands."""
    if x.ring.f == y.ring.f or x.is_zero or y.is_zero:
        return (x - y).sign()
    sx, sy = x.sign(), y.sign()
    if sx != sy:
        return (sx > sy) - (sx < sy)
    # same sign, both nonzero: compare squares, which have no radicand left
    d = (x * x - y * y).sign()
    return d if sx > 0 else -d


def sqrt_of(value: ExactValue) -> ExactValue:
    """sqrt of a nonnegative rational value."""
    q = value.to_fraction()
    return ExactValue._from_ring(_sqrt_ring(q))


# interval fallback

_INTERVAL_LOCK = threading.Lock()


def _in_precision(bits: int, fn):
    with _INTERVAL_LOCK:
        saved = mpmath.iv.prec
        mpmath.iv.prec = bits
        try:
            return fn()
        finally:
            mpmath.iv.prec = saved


@dataclass(frozen=True)
class IntervalValue:
    """A real enclosure (mpmath.iv) used when exact sums mix incompatible radicands."""
    enclosure: object
    bits: int = INTERVAL_FALLBACK_BITS

    @classmethod
    def from_exact(cls, value: ExactValue, bits: int = INTERVAL_FALLBACK_BITS) -> 'IntervalValue':
        r = value.ring
        if r.b or r.d:
            raise ValueError("interval fallback is real-only")

        def build():
            iv = mpmath.iv
            return iv.sqrt(r.f) * (iv.mpf(r.a.numerator) / r.a.denominator
                                   + iv.mpf(r.c.numerator) / r.c.denominator * iv.sqrt(2))

        return cls(_in_precision(bits, build), bits)

    @staticmethod
    def coerce(value, bits: int = INTERVAL_FALLBACK_BITS) -> 'IntervalValue':
        if isinstance(value, IntervalValue):
            return value
        return IntervalValue.from_exact(ExactValue.coerce(value), bits)

    def __add__(self, other) -> 'IntervalValue':
        other = IntervalValue.coerce(other, self.bits)
        return IntervalValue(_in_precision(self.bits, lambda: self.enclosure + other.enclosure), self.bits)

    __radd__ = __add__

    def __neg__(self) -> 'IntervalValue':
        return IntervalValue(_in_precision(self.bits, lambda: -self.enclosure), self.bits)

    def __sub__(self, other) -> 'IntervalValue':
        return self + (-IntervalValue.coerce(other, self.bits))

    def __mul__(self, other) -> 'IntervalValue':
        other = IntervalValue.coerce(other, self.bits)
        return IntervalValue(_in_precision(self.bits, lambda: self.enclosure * other.enclosure), self.bits)

    __rmul__ = __mul__

    def sign(self) -> Optional[int]:
        """Sign when the enclosure decides it, None when it straddles zero."""
        low, high = (mpf_sign(end) for end in self.enclosure._mpi_)
        if low > 0:
            return 1
        if high < 0:
            return -1
        if low == 0 and high == 0:
            return 0
        return None

    def contains_zero(self) -> bool:
        return self.sign() in (0, None)

    def width(self) -> float:
        return float(_in_precision(self.bits, lambda: self.enclosure.delta))

    def __float__(self) -> float:
        return float(_in_precision(self.bits, lambda: self.enclosure.mid))

    def __str__(self) -> str:
        return str(self.enclosure)


def exact_sum(terms: List[ExactValue], fallback_bits: Optional[int] = None):
    """
    Sum exact terms.  When radicands are incompatible and fallback_bits is given,
    the sum is returned as an IntervalValue instead of raising.  Terms that are
    already intervals force the interval sum.
    """
    intervals = [t for t in terms if isinstance(t, IntervalValue)]
    if intervals:
        return _interval_sum(terms, fallback_bits if fallback_bits is not None else intervals[0].bits)
    try:
        total = EXACT_ZERO
        for term in terms:
            total = total + term
        return total
    except IncompatibleRadicals:
        if fallback_bits is None:
            raise
        logger.debug("falling back to %d-bit intervals for a mixed-radical sum", fallback_bits)
        return _interval_sum(terms, fallback_bits)


def _interval_sum(terms, bits: int) -> IntervalValue:
    total = IntervalValue.from_exact(EXACT_ZERO, bits)
    for term in terms:
        total = total + IntervalValue.coerce(term, bits)
    return total


def parse_exact(text: str) -> ExactValue:
    """Parse literals such as '3', '-6/3', '1/2+3/4i', '-i', '2/-7i', 'sqrt(1/3)'."""
    text = text.replace(' ', '')
    m = re.fullmatch(r'sqrt\((.+)\)', text)
    if m:
        q = SignedRational.parse(m.group(1))
        return ExactValue(re=q, sqrt_flag_re=True)
    if not text.endswith('i'):
        return ExactValue(re=SignedRational.parse(text))
    split = 0
    for k in range(len(text) - 1, 0, -1):
        if text[k] in '+-' and text[k - 1] != '/':
            split = k
            break
    re_text, im_text = text[:split], text[split:-1]
    if im_text in ('', '+'):
        im = ONE
    elif im_text == '-':
        im = SignedRational(1, 1, True, False)
    else:
        im = SignedRational.parse(im_text)
    re_value = SignedRational.parse(re_text) if re_text else ZERO
    return ExactValue(re=re_value, im=im)


# codecs

@dataclass(frozen=True)
class ClassDescriptor:
    """Number class: family N/Qplus/Q/C, precision p and ordered flag widths."""
    family: str
    p: int
    flags: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.family not in FAMILY_WIDTHS:
            raise ValueError(f"unknown family {self.family!r}")
        if self.p < 1:
            raise ValueError("precision p must be at least 1")
        seen = set()
        for name, width in self.flags:
            if name not in FLAG_NAMES or name in seen:
                raise ValueError(f"bad flag {name!r}")
            seen.add(name)
            if name == 'omega' and (width != 3 or self.family != 'C'):
                raise ValueError("omega flag is a 3-bit register on C")
            if name == 'sqrt' and width not in (1, 2):
                raise ValueError("sqrt flag width is 1 or 2")
            if name == 'sqrt' and width == 2 and self.family != 'C':
                raise ValueError("two sqrt flag bits only make sense on C")
            if name == 'sqrthalf' and width < 1:
                raise ValueError("sqrthalf width must be positive")

    @property
    def family_width(self) -> int:
        return FAMILY_WIDTHS[self.family](self.p)

    @property
    def width(self) -> int:
        return self.family_width + sum(width for _, width in self.flags)

    def flag_width(self, name: str) -> int:
        return dict(self.flags).get(name, 0)

    def has_flag(self, name: str) -> bool:
        return name in dict(self.flags)

    @classmethod
    def parse(cls, text: str) -> 'ClassDescriptor':
        """'C:3', 'Q+:2:sqrt', 'C:3:omega=3,sqrt=2'."""
        parts = text.split(':')
        if len(parts) not in (2, 3) or parts[0] not in FAMILY_ALIASES:
            raise ValueError(f"bad class descriptor {text!r}")
        flags = []
        if len(parts) == 3 and parts[2]:
            for item in parts[2].split(','):
                name, _, width = item.partition('=')
                flags.append((name, int(width) if width else default_flag_width(name)))
        return cls(FAMILY_ALIASES[parts[0]], int(parts[1]), tuple(flags))

    def __str__(self) -> str:
        family = 'Q+' if self.family == 'Qplus' else self.family
        text = f"{family}:{self.p}"
        if self.flags:
            text += ':' + ','.join(f"{name}={width}" for name, width in self.flags)
        return text


def default_flag_width(name: str) -> int:
    return {'omega': 3, 'sqrt': 1, 'sqrthalf': DEFAULT_SQRTHALF_WIDTH}[name]


@dataclass(frozen=True, eq=False)
class BitString:
    """Bits as a '0'/'1' string plus display grouping."""
    bits: str
    groups: Tuple[int, ...] = ()

    def __post_init__(self):
        if set(self.bits) - {'0', '1'}:
            raise ValueError("bit strings hold only 0 and 1")
        if self.groups and sum(self.groups) != len(self.bits):
            raise ValueError("groups must cover the bits exactly")

    @classmethod
    def parse(cls, text: str) -> 'BitString':
        chunks = text.split()
        return cls(''.join(chunks), tuple(len(c) for c in chunks))

    @property
    def length(self) -> int:
        return len(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __eq__(self, other) -> bool:
        if isinstance(other, str):
            return self.bits == other.replace(' ', '')
        if isinstance(other, BitString):
            return self.bits == other.bits
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.bits)

    def __str__(self) -> str:
        if not self.groups:
            return self.bits
        out, pos = [], 0
        for size in self.groups:
            out.append(self.bits[pos:pos + size])
            pos += size
        return ' '.join(out)


def _block(value: int, p: int) -> str:
    if value >= 1 << p:
        raise OutOfRange(f"{value} does not fit in {p} bits")
    return format(value, f'0{p}b') if p else ''


def _check_tags(value: ExactValue, cls: ClassDescriptor):
    if value.symbolic_sqrt is not None:
        raise FlagMismatch("a global sqrt multiplier has no slot in the binary layouts")
    if not (value.re2.is_zero and value.im2.is_zero):
        raise FlagMismatch("sqrt2 components have no slot in the binary layouts; use smallest_class")
    if value.omega_power and not cls.has_flag('omega'):
        raise FlagMismatch(f"value carries omega^{value.omega_power} but {cls} has no omega flag")
    if (value.sqrt_flag_re or value.sqrt_flag_im) and not cls.has_flag('sqrt'):
        raise FlagMismatch(f"value carries a sqrt flag but {cls} has none")
    if value.sqrt_half_power and not cls.has_flag('sqrthalf'):
        raise FlagMismatch(f"value carries a 1/sqrt2 power but {cls} has no sqrthalf flag")


def _real_only(value: ExactValue, cls: ClassDescriptor):
    if not value.im.is_zero:
        raise OutOfRange(f"{cls.family}_{cls.p} is a real class but the value has an imaginary part")


def encode(value: ExactValue, cls: ClassDescriptor) -> BitString:
    """Exact fixed-width layout of a value in class cls."""
    _check_tags(value, cls)
    p = cls.p
    chunks: List[str] = []

    for name, width in cls.flags:
        if name == 'omega':
            chunks.append(format((value.omega_power or 0) % 8, '03b'))
        elif name == 'sqrthalf':
            chunks.append(_block(value.sqrt_half_power, width))
        elif width == 2:
            chunks.append('1' if value.sqrt_flag_re else '0')
            chunks.append('1' if value.sqrt_flag_im else '0')
        else:
            flags = {value.sqrt_flag_re if not value.re.is_zero else None,
                     value.sqrt_flag_im if not value.im.is_zero else None} - {None}
            if len(flags) > 1:
                raise FlagMismatch("one sqrt bit cannot cover mixed flagged/unflagged components")
            chunks.append('1' if (value.sqrt_flag_re or value.sqrt_flag_im) else '0')

    def signed(q: SignedRational) -> List[str]:
        return ['1' if q.numerator_negative else '0', '1' if q.denominator_negative else '0',
                _block(q.numerator, p), _block(q.denominator, p)]

    if cls.family == 'N':
        _real_only(value, cls)
        q = value.re.to_fraction()
        if q < 0 or q.denominator != 1:
            raise OutOfRange(f"{value} is not a natural number")
        chunks.append(_block(q.numerator, p))
    elif cls.family == 'Qplus':
        _real_only(value, cls)
        if value.re.to_fraction() < 0:
            raise OutOfRange(f"{value} is negative")
        chunks += [_block(value.re.numerator, p), _block(value.re.denominator, p)]
    elif cls.family == 'Q':
        _real_only(value, cls)
        chunks += signed(value.re)
    else:
        chunks += signed(value.re) + signed(value.im)

    return BitString(''.join(chunks), tuple(len(c) for c in chunks))


def decode(bits: Union[BitString, str], cls: ClassDescriptor) -> ExactValue:
    """Exact inverse of encode; rationals come back unreduced."""
    if isinstance(bits, str):
        bits = BitString.parse(bits)
    raw = bits.bits
    if len(raw) != cls.width:
        raise BadWidth(f"{cls} needs {cls.width} bits, got {len(raw)}")
    pos = 0

    def take(n: int) -> str:
        nonlocal pos
        chunk = raw[pos:pos + n]
        pos += n
        return chunk

    def magnitude(n: int) -> int:
        chunk = take(n)
        return int(chunk, 2) if chunk else 0

    tags = {}
    for name, width in cls.flags:
        if name == 'omega':
            tags['omega_power'] = magnitude(3)
        elif name == 'sqrthalf':
            tags['sqrt_half_power'] = magnitude(width)
        elif width == 2:
            tags['sqrt_flag_re'] = take(1) == '1'
            tags['sqrt_flag_im'] = take(1) == '1'
        else:
            flag = take(1) == '1'
            tags['sqrt_flag_re'] = flag
            if cls.family == 'C':
                tags['sqrt_flag_im'] = flag

    p = cls.p

    def signed() -> SignedRational:
        num_neg, den_neg = take(1) == '1', take(1) == '1'
        num, den = magnitude(p), magnitude(p)
        if den == 0:
            raise ZeroDenominator("denominator block decodes to 0")
        return SignedRational(num, den, num_neg, den_neg)

    if cls.family == 'N':
        return ExactValue(re=SignedRational(magnitude(p)), **tags)
    if cls.family == 'Qplus':
        num, den = magnitude(p), magnitude(p)
        if den == 0:
            raise ZeroDenominator("denominator block decodes to 0")
        return ExactValue(re=SignedRational(num, den), **tags)
    if cls.family == 'Q':
        return ExactValue(re=signed(), **tags)
    re = signed()
    return ExactValue(re=re, im=signed(), **tags)


def _signed_parts(q: SignedRational) -> Tuple[int, int]:
    return (-q.numerator if q.numerator_negative else q.numerator,
            -q.denominator if q.denominator_negative else q.denominator)


def ratio(x: ExactValue, y: ExactValue, cls: ClassDescriptor) -> Tuple[ExactValue, ClassDescriptor]:
    """
    Exact quotient x/y of two values in cls, laid out in the widened output class:
    N_p -> Q+_p, Q+_p -> Q+_2p, Q_p -> Q_2p, C_p -> C_(8p+2).  The omega flag carries
    (s_x - s_y) mod 8.  On a real family the quotient keeps a sqrt flag when either
    operand has one; with a single flagged operand the other is squared under the
    root, which widens the output to Q+_2p (from N_p) or 3p (from Q+_p and Q_p).
    """
    if y.is_zero:
        raise DivideByZero("ratio with a zero denominator amplitude")
    for name, _ in cls.flags:
        if name == 'sqrthalf' or (name == 'sqrt' and cls.family == 'C'):
            raise FlagMismatch(f"ratio is not defined for {cls}")
    encode(x, cls)
    encode(y, cls)
    p = cls.p

    if cls.family in ('N', 'Qplus', 'Q'):
        xn, xd = _signed_parts(x.re)
        yn, yd = _signed_parts(y.re)
        width = p if cls.family == 'N' else 2 * p
        if x.sqrt_flag_re == y.sqrt_flag_re:
            num, den = xn * yd, xd * yn
        elif x.sqrt_flag_re:
            # sqrt(x)/y = sgn(y)*sqrt(x/y^2)
            num, den = xn * yd * abs(yd), xd * yn * abs(yn)
            width += p
        else:
            # x/sqrt(y) = sgn(x)*sqrt(x^2/y)
            num, den = xn * abs(xn) * yd, xd * abs(xd) * yn
            width += p
        family = 'Q' if cls.family == 'Q' else 'Qplus'
        out = ExactValue(re=SignedRational.of(num, den), sqrt_flag_re=x.sqrt_flag_re or y.sqrt_flag_re)
        return out, ClassDescriptor(family, width, cls.flags)

    an, ad = _signed_parts(x.re)
    bn, bd = _signed_parts(x.im)
    cn, cd = _signed_parts(y.re)
    dn, dd = _signed_parts(y.im)
    # (a+ib)/(c+id) with common factors cd*dd cancelled
    common = cd * dd
    den = ad * bd * (cn * cn * dd * dd + dn * dn * cd * cd)
    re_num = (an * cn * bd * dd + bn * dn * ad * cd) * common
    im_num = (bn * cn * ad * dd - an * dn * bd * cd) * common
    flags = ()
    omega = None
    if cls.has_flag('omega'):
        flags = (('omega', 3),)
        omega = ((x.omega_power or 0) - (y.omega_power or 0)) % 8
    value = ExactValue(re=SignedRational.of(re_num, den), im=SignedRational.of(im_num, den),
                       omega_power=omega)
    return value, ClassDescriptor('C', 8 * p + 2, flags)


def _bit_length(*values: Fraction) -> int:
    return max([1] + [max(abs(v.numerator), v.denominator).bit_length() for v in values])


def smallest_class(value: ExactValue) -> Tuple[ExactValue, ClassDescriptor]:
    """
    An equivalent tagged value and the smallest class that encodes it:
    N, Q+, Q, C in that order, then omega-tagged C, a 1/sqrt2 power, or
    componentwise sqrt flags.  FlagMismatch when none of these forms applies.
    """
    r = value.ring
    if r.f == 1 and r.c == 0 and r.d == 0:
        if r.b == 0:
            if r.a >= 0 and r.a.denominator == 1:
                return ExactValue.of(r.a), ClassDescriptor('N', _bit_length(r.a))
            family = 'Qplus' if r.a >= 0 else 'Q'
            return ExactValue.of(r.a), ClassDescriptor(family, _bit_length(r.a))
        return ExactValue.of(r.a, r.b), ClassDescriptor('C', _bit_length(r.a, r.b))

    # real multiples of sqrt2 stay in a real family
    if r.f == 1 and r.a == 0 and r.b == 0 and r.d == 0:
        tagged = replace(ExactValue.of(2 * r.c), sqrt_half_power=1)
        family = 'Qplus' if r.c > 0 else 'Q'
        return tagged, ClassDescriptor(family, _bit_length(2 * r.c), (('sqrthalf', 1),))

    for s in (1, 3, 5, 7):
        rotated = _ring_mul(r, _OMEGA_RING[(8 - s) % 8])
        if rotated.f == 1 and rotated.c == 0 and rotated.d == 0:
            tagged = replace(ExactValue.of(rotated.a, rotated.b), omega_power=s)
            return tagged, ClassDescriptor('C', _bit_length(rotated.a, rotated.b), (('omega', 3),))

    if (r.a == 0 or r.c == 0) and (r.b == 0 or r.d == 0):
        def square(x: Fraction, y: Fraction) -> Fraction:
            # (sqrt(f)*(x + y*sqrt2))^2 with one of x, y zero, sign kept
            q = r.f * (x * x + 2 * y * y)
            return q if _sign_q2(x, y) >= 0 else -q

        re_sq, im_sq = square(r.a, r.c), square(r.b, r.d)
        tagged = ExactValue(re=SignedRational.from_fraction(re_sq), im=SignedRational.from_fraction(im_sq),
                            sqrt_flag_re=re_sq != 0, sqrt_flag_im=im_sq != 0)
        p = _bit_length(re_sq, im_sq)
        if im_sq == 0:
            return tagged, ClassDescriptor('Qplus' if re_sq >= 0 else 'Q', p, (('sqrt', 1),))
        width = 1 if (re_sq != 0) else 2
        return tagged, ClassDescriptor('C', p, (('sqrt', width),))

    raise FlagMismatch(f"{value} lies outside the encodable classes")


def pack(value: ExactValue) -> Dict[str, str]:
    """JSON form: smallest class plus its grouped bit layout."""
    tagged, cls = smallest_class(value)
    return {'bits': str(encode(tagged, cls)), 'class': str(cls)}


def unpack(record: Dict[str, str]) -> ExactValue:
    return decode(BitString.parse(record['bits']), ClassDescriptor.parse(record['class']))
