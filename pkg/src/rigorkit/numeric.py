"""Exact dyadic scalars, outward-rounded intervals and enclosures of constants.

Every interval endpoint is a :class:`Dyadic`.  Ring operations on dyadics are
exact; an interval operation computes the exact image endpoints (or tight
rational bounds for them) and then rounds outward to the working precision.

Precision ``p`` means that an endpoint keeps at most ``p`` bits below its
leading bit, i.e. a significand of ``p + 1`` bits.  All rounding is
"correctly rounded outward": an endpoint is the nearest grid point on the
safe side of the exact value, so raising ``p`` can only shrink a result.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
import functools
import math
from fractions import Fraction
from typing import Callable, Iterator, Union

DEFAULT_PRECISION = 64

_precision: contextvars.ContextVar[int] = contextvars.ContextVar(
    "rigorkit_precision", default=DEFAULT_PRECISION
)


class DomainError(ArithmeticError):
    """An operation was applied outside its domain (e.g. sqrt of a negative)."""

    def __init__(self, message: str, path: tuple = ()):
        super().__init__(message)
        self.path = path


def get_precision() -> int:
    return _precision.get()


@contextlib.contextmanager
def precision(bits: int) -> Iterator[int]:
    """Temporarily set the working precision for interval operations."""
    if bits < 1:
        raise ValueError("precision must be positive")
    token = _precision.set(bits)
    try:
        yield bits
    finally:
        _precision.reset(token)


def _prec(prec: int | None) -> int:
    return _precision.get() if prec is None else prec


class Dyadic:
    """The number ``man * 2**exp`` with an odd (or zero) mantissa."""

    __slots__ = ("man", "exp")

    def __init__(self, man: int = 0, exp: int = 0):
        if man == 0:
            exp = 0
        else:
            tz = (man & -man).bit_length() - 1
            if tz:
                man >>= tz
                exp += tz
        object.__setattr__(self, "man", man)
        object.__setattr__(self, "exp", exp)

    def __setattr__(self, name, value):
        raise AttributeError("Dyadic is immutable")

    @classmethod
    def from_value(cls, value: Union["Dyadic", int, Fraction, str]) -> "Dyadic":
        """Exact conversion; raises ValueError if the value is not dyadic."""
        if isinstance(value, Dyadic):
            return value
        if isinstance(value, str):
            value = Fraction(value)
        if isinstance(value, int):
            return cls(value, 0)
        q = Fraction(value)
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{q} is not a dyadic rational")
        return cls(q.numerator, -(den.bit_length() - 1))

    def to_fraction(self) -> Fraction:
        if self.exp >= 0:
            return Fraction(self.man << self.exp)
        return Fraction(self.man, 1 << -self.exp)

    def __float__(self) -> float:
        return math.ldexp(float(self.man), self.exp) if self.man.bit_length() < 1000 else float(self.to_fraction())

    def bits(self) -> int:
        """Significant bits of the mantissa."""
        return abs(self.man).bit_length()

    def is_zero(self) -> bool:
        return self.man == 0

    def sign(self) -> int:
        return (self.man > 0) - (self.man < 0)

    def __add__(self, other):
        other = _as_dyadic(other)
        if other is NotImplemented:
            return NotImplemented
        if self.man == 0:
            return other
        if other.man == 0:
            return self
        e = min(self.exp, other.exp)
        return Dyadic((self.man << (self.exp - e)) + (other.man << (other.exp - e)), e)

    __radd__ = __add__

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.man, self.exp)

    def __sub__(self, other):
        other = _as_dyadic(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _as_dyadic(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _as_dyadic(other)
        if other is NotImplemented:
            return NotImplemented
        return Dyadic(self.man * other.man, self.exp + other.exp)

    __rmul__ = __mul__

    def half(self) -> "Dyadic":
        return Dyadic(self.man, self.exp - 1)

    def _cmp(self, other) -> int:
        o = _as_dyadic(other)
        if o is NotImplemented:
            q = Fraction(other)
            a = self.to_fraction()
            return (a > q) - (a < q)
        e = min(self.exp, o.exp)
        a = self.man << (self.exp - e)
        b = o.man << (o.exp - e)
        return (a > b) - (a < b)

    def __eq__(self, other):
        if isinstance(other, (Dyadic, int)):
            o = _as_dyadic(other)
            return self.man == o.man and self.exp == o.exp
        if isinstance(other, Fraction):
            return self.to_fraction() == other
        return NotImplemented

    def __hash__(self):
        return hash(self.to_fraction())

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __repr__(self):
        return f"Dyadic({self.man}, {self.exp})"

    def __str__(self):
        return str(self.to_fraction())


def _as_dyadic(x):
    if isinstance(x, Dyadic):
        return x
    if isinstance(x, int):
        return Dyadic(x, 0)
    return NotImplemented


# ---------------------------------------------------------------------------
# rounding


def _floor_log2(num: int, den: int) -> int:
    """floor(log2(num/den)) for positive integers."""
    k = num.bit_length() - den.bit_length()
    if k >= 0:
        if num < (den << k):
            k -= 1
    elif (num << -k) < den:
        k -= 1
    return k


def round_rational(num: int, den: int, prec: int, up: bool) -> Dyadic:
    """Round ``num/den`` (den > 0) to ``prec`` bits below the leading bit."""
    if num == 0:
        return Dyadic(0)
    k = _floor_log2(abs(num), den)
    e = k - prec
    if e >= 0:
        n, d = num, den << e
    else:
        n, d = num << -e, den
    m = -((-n) // d) if up else n // d
    return Dyadic(m, e)


def round_fraction(q: Fraction | int, prec: int, up: bool) -> Dyadic:
    q = Fraction(q)
    return round_rational(q.numerator, q.denominator, prec, up)


def round_dyadic(x: Dyadic, prec: int, up: bool) -> Dyadic:
    if x.bits() <= prec + 1:
        return x
    shift = x.bits() - (prec + 1)
    m = -((-x.man) >> shift) if up else x.man >> shift
    return Dyadic(m, x.exp + shift)


# ---------------------------------------------------------------------------
# intervals


Number = Union[int, Fraction, Dyadic]


class Interval:
    """Closed interval ``[lo, hi]`` with dyadic endpoints."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Number, hi: Number | None = None):
        lo = Dyadic.from_value(lo)
        hi = lo if hi is None else Dyadic.from_value(hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    @classmethod
    def _raw(cls, lo: Dyadic, hi: Dyadic) -> "Interval":
        obj = object.__new__(cls)
        object.__setattr__(obj, "lo", lo)
        object.__setattr__(obj, "hi", hi)
        return obj

    @classmethod
    def enclose(cls, lo: Number, hi: Number | None = None, prec: int | None = None) -> "Interval":
        """Smallest interval at precision ``prec`` containing the rational range."""
        p = _prec(prec)
        lo_q = Fraction(lo.to_fraction() if isinstance(lo, Dyadic) else lo)
        hi_q = lo_q if hi is None else Fraction(hi.to_fraction() if isinstance(hi, Dyadic) else hi)
        if lo_q > hi_q:
            raise ValueError(f"empty interval [{lo_q}, {hi_q}]")
        return cls._raw(round_fraction(lo_q, p, False), round_fraction(hi_q, p, True))

    def _round(self, prec: int | None) -> "Interval":
        p = _prec(prec)
        return Interval._raw(round_dyadic(self.lo, p, False), round_dyadic(self.hi, p, True))

    # -- queries -----------------------------------------------------------

    @property
    def lo_q(self) -> Fraction:
        return self.lo.to_fraction()

    @property
    def hi_q(self) -> Fraction:
        return self.hi.to_fraction()

    def width(self) -> Fraction:
        return (self.hi - self.lo).to_fraction()

    def mid(self) -> Dyadic:
        return (self.lo + self.hi).half()

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        if isinstance(x, Dyadic):
            return self.lo <= x <= self.hi
        q = Fraction(x)
        return self.lo_q <= q <= self.hi_q

    __contains__ = contains

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def intersection(self, other: "Interval") -> "Interval":
        if not self.intersects(other):
            raise ValueError("disjoint intervals")
        return Interval._raw(max(self.lo, other.lo), min(self.hi, other.hi))

    def hull(self, other: "Interval") -> "Interval":
        return Interval._raw(min(self.lo, other.lo), max(self.hi, other.hi))

    def contains_zero(self) -> bool:
        return self.lo.man <= 0 <= self.hi.man

    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __repr__(self):
        return f"Interval({self.lo}, {self.hi})"

    def __str__(self):
        return f"[{float(self.lo):.17g}, {float(self.hi):.17g}]"

    # -- arithmetic (operators use the context precision) -------------------

    def __add__(self, other):
        return interval_add(self, _as_interval(other))

    __radd__ = __add__

    def __sub__(self, other):
        return interval_sub(self, _as_interval(other))

    def __rsub__(self, other):
        return interval_sub(_as_interval(other), self)

    def __mul__(self, other):
        return interval_mul(self, _as_interval(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return interval_div(self, _as_interval(other))

    def __rtruediv__(self, other):
        return interval_div(_as_interval(other), self)

    def __neg__(self):
        return Interval._raw(-self.hi, -self.lo)

    def __pow__(self, n: int):
        return interval_pow(self, n)


def _as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, (int, Dyadic)):
        return Interval(x)
    if isinstance(x, Fraction):
        return Interval.enclose(x)
    raise TypeError(f"cannot use {type(x).__name__} as an interval")


def interval_add(a: Interval, b: Interval, prec: int | None = None) -> Interval:
    return Interval._raw(a.lo + b.lo, a.hi + b.hi)._round(prec)


def interval_sub(a: Interval, b: Interval, prec: int | None = None) -> Interval:
    return Interval._raw(a.lo - b.hi, a.hi - b.lo)._round(prec)


def interval_mul(a: Interval, b: Interval, prec: int | None = None) -> Interval:
    ps = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return Interval._raw(min(ps), max(ps))._round(prec)


def interval_div(a: Interval, b: Interval, prec: int | None = None) -> Interval:
    if b.contains_zero():
        raise DomainError(f"division by an interval containing zero: {b!r}")
    p = _prec(prec)
    qs = [x.to_fraction() / y.to_fraction() for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    return Interval._raw(round_fraction(min(qs), p, False), round_fraction(max(qs), p, True))


def interval_pow(a: Interval, n: int, prec: int | None = None) -> Interval:
    """Tight enclosure of ``{x**n : x in a}`` for natural ``n``."""
    if n < 0:
        raise ValueError("negative exponent")
    if n == 0:
        return Interval(1)
    lo_n = Dyadic(a.lo.man ** n, a.lo.exp * n)
    hi_n = Dyadic(a.hi.man ** n, a.hi.exp * n)
    if n % 2 == 1 or a.lo.man >= 0:
        r = Interval._raw(lo_n, hi_n)
    elif a.hi.man <= 0:
        r = Interval._raw(hi_n, lo_n)
    else:
        r = Interval._raw(Dyadic(0), max(lo_n, hi_n))
    return r._round(prec)


# -- sqrt -----------------------------------------------------------------


def _sqrt_round(x: Dyadic, prec: int, up: bool) -> Dyadic:
    if x.man < 0:
        raise DomainError(f"sqrt of negative number {x}")
    if x.man == 0:
        return Dyadic(0)
    # choose f with x * 4**-f holding about 2*(prec+1) bits
    target = 2 * (prec + 2)
    f = (x.exp + x.bits() - target) // 2
    shift = x.exp - 2 * f
    if shift >= 0:
        n, exact = x.man << shift, True
    else:
        n, exact = x.man >> -shift, (x.man & ((1 << -shift) - 1)) == 0
    r = math.isqrt(n)
    if up and not (exact and r * r == n):
        r += 1
    return round_dyadic(Dyadic(r, f), prec, up)


def interval_sqrt(a: Interval, prec: int | None = None) -> Interval:
    if a.lo.man < 0:
        raise DomainError(f"sqrt of interval with negative lower end {a!r}")
    p = _prec(prec)
    return Interval._raw(_sqrt_round(a.lo, p, False), _sqrt_round(a.hi, p, True))


# -- arctan ---------------------------------------------------------------


def _atan_series(u: int, v: int, bits: int) -> tuple[int, int]:
    """Bounds ``(L, U)`` with ``L/2**bits <= arctan(u/v) <= U/2**bits``.

    Requires ``0 <= u <= v``.  Uses Euler's series
    ``arctan x = sum c_n x^(2n+1)/(1+x^2)^(n+1)`` whose term ratio is at
    most ``x^2/(1+x^2) <= 1/2``, so the tail after a term is bounded by
    twice the next term.
    """
    if u == 0:
        return 0, 0
    w = u * u + v * v
    scale = 1 << bits
    lo_t = (scale * u * v) // w
    hi_t = -((-scale * u * v) // w)
    lo_sum = hi_sum = 0
    n = 0
    while True:
        lo_sum += lo_t
        hi_sum += hi_t
        num = (2 * n + 2) * u * u
        den = (2 * n + 3) * w
        lo_t = (lo_t * num) // den
        hi_t = -((-hi_t * num) // den)
        n += 1
        if hi_t <= 1:
            return lo_sum, hi_sum + 2 * hi_t


@functools.lru_cache(maxsize=256)
def _pi_fixed(bits: int) -> tuple[int, int]:
    lo, hi = _atan_series(1, 1, bits)
    return 4 * lo, 4 * hi


def _atan_fixed(num: int, den: int, bits: int) -> tuple[int, int]:
    """Fixed-point bounds of arctan(num/den) at scale 2**bits (den > 0)."""
    if num < 0:
        lo, hi = _atan_fixed(-num, den, bits)
        return -hi, -lo
    if num <= den:
        return _atan_series(num, den, bits)
    plo, phi = _pi_fixed(bits + 1)
    lo, hi = _atan_series(den, num, bits)
    # arctan x = pi/2 - arctan(1/x); pi/2 at scale 2**bits is (pi at 2**(bits+1)) / 4
    return (plo >> 2) - hi, -((-phi) >> 2) - lo


def _ziv(bounds: Callable[[int], tuple[Fraction, Fraction]], prec: int, up: bool) -> Dyadic:
    """Correctly rounded (toward +inf if ``up``) value from shrinking bounds."""
    extra = 16
    while True:
        lo, hi = bounds(prec + extra)
        a = round_fraction(lo, prec, up)
        b = round_fraction(hi, prec, up)
        if a == b:
            return a
        if extra > 4096:
            # value too close to a grid point to decide: stay outward
            return b if up else a
        extra *= 2


def _atan_point(x: Dyadic, prec: int, up: bool) -> Dyadic:
    if x.man == 0:
        return Dyadic(0)
    q = x.to_fraction()

    # |arctan q| >= |q|/2 for |q| < 1, so this many absolute bits give `bits` relative bits
    mag = _floor_log2(abs(q.numerator), q.denominator)
    offset = 4 + max(0, -mag)

    def bounds(bits: int):
        scale_bits = bits + offset
        lo, hi = _atan_fixed(q.numerator, q.denominator, scale_bits)
        return Fraction(lo, 1 << scale_bits), Fraction(hi, 1 << scale_bits)

    return _ziv(bounds, prec, up)


def interval_arctan(a: Interval, prec: int | None = None) -> Interval:
    p = _prec(prec)
    return Interval._raw(_atan_point(a.lo, p, False), _atan_point(a.hi, p, True))


# ---------------------------------------------------------------------------
# constants


class ConstantName(str, enum.Enum):
    PI = "PI"
    SQRT2 = "SQRT2"
    ATAN_SQRT2_OVER_5 = "ATAN_SQRT2_OVER_5"
    PT = "PT"
    DELTA_OCT = "DELTA_OCT"

    @classmethod
    def parse(cls, name: str) -> "ConstantName":
        key = name.strip().upper().replace("-", "_")
        aliases = {"SQRT_2": "SQRT2", "DOCT": "DELTA_OCT", "ATAN": "ATAN_SQRT2_OVER_5"}
        return cls(aliases.get(key, key))


def _constant_bounds(name: ConstantName, bits: int) -> tuple[Fraction, Fraction]:
    """Rigorous rational bounds with absolute error around 2**-bits."""
    w = bits + 8
    with precision(w):
        if name is ConstantName.SQRT2:
            iv = interval_sqrt(Interval(2))
        else:
            plo, phi = _pi_fixed(w)
            pi = Interval._raw(Dyadic(plo, -w), Dyadic(phi, -w))
            if name is ConstantName.PI:
                iv = pi
            else:
                s2 = interval_sqrt(Interval(2))
                arg = s2 / 5
                at = interval_arctan(arg)
                if name is ConstantName.ATAN_SQRT2_OVER_5:
                    iv = at
                elif name is ConstantName.PT:
                    iv = 4 * at - pi / 3
                else:
                    iv = (pi - 4 * at) / (2 * s2)
    return iv.lo_q, iv.hi_q


@functools.lru_cache(maxsize=512)
def enclose_constant(name: ConstantName | str, precision: int = DEFAULT_PRECISION) -> Interval:
    """Tightest enclosure of a named constant at the given precision.

    The result has width at most two units in the last place, so at most
    ``2**(-precision + 2)`` for every constant here.
    """
    if precision < 8:
        raise ValueError("precision must be at least 8 bits")
    name = ConstantName.parse(name) if isinstance(name, str) else name
    lo = _ziv(lambda b: _constant_bounds(name, b), precision, False)
    hi = _ziv(lambda b: _constant_bounds(name, b), precision, True)
    return Interval._raw(lo, hi)


def to_interval(x, prec: int | None = None) -> Interval:
    """Enclose an int, Fraction, Dyadic, decimal string or ConstantName."""
    if isinstance(x, Interval):
        return x
    if isinstance(x, ConstantName):
        return enclose_constant(x, _prec(prec))
    if isinstance(x, str):
        try:
            return enclose_constant(ConstantName.parse(x), _prec(prec))
        except ValueError:
            x = Fraction(x)
    if isinstance(x, float):
        x = Fraction(x)
    if isinstance(x, (int, Dyadic)):
        return Interval(x)
    return Interval.enclose(x, prec=prec)
