"""Exact sparse multivariate polynomials with rational coefficients."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .numeric import Interval, interval_add, interval_mul, interval_pow, to_interval

Monomial = tuple[int, ...]


class ArityError(ValueError):
    pass


class DegenerateBox(ValueError):
    pass


def _grlex_key(m: Monomial):
    return (sum(m), m)


class SparsePoly:
    """Polynomial in ``arity`` variables stored as ``{exponents: coefficient}``.

    Zero coefficients are never stored.  Instances are treated as immutable.
    """

    __slots__ = ("arity", "terms", "_hash", "_scaled")

    def __init__(self, arity: int, terms: Mapping[Monomial, object] | None = None):
        self.arity = arity
        clean: dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                m = tuple(m)
                if len(m) != arity:
                    raise ArityError(f"monomial {m} does not have arity {arity}")
                if any(e < 0 for e in m):
                    raise ValueError(f"negative exponent in {m}")
                c = Fraction(c)
                if c:
                    clean[m] = clean.get(m, 0) + c
            clean = {m: c for m, c in clean.items() if c}
        self.terms = clean
        self._hash = None
        self._scaled = None

    @classmethod
    def _wrap(cls, arity: int, terms: dict) -> "SparsePoly":
        obj = object.__new__(cls)
        obj.arity = arity
        obj.terms = terms
        obj._hash = None
        obj._scaled = None
        return obj

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, arity: int) -> "SparsePoly":
        return cls._wrap(arity, {})

    @classmethod
    def constant(cls, arity: int, c) -> "SparsePoly":
        c = Fraction(c)
        return cls._wrap(arity, {(0,) * arity: c} if c else {})

    @classmethod
    def var(cls, arity: int, index: int) -> "SparsePoly":
        if not 0 <= index < arity:
            raise ArityError(f"variable {index} out of range for arity {arity}")
        m = [0] * arity
        m[index] = 1
        return cls._wrap(arity, {tuple(m): Fraction(1)})

    @classmethod
    def variables(cls, arity: int) -> list["SparsePoly"]:
        return [cls.var(arity, i) for i in range(arity)]

    # -- metadata ----------------------------------------------------------

    def monomial_count(self) -> int:
        return len(self.terms)

    def total_degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return max((sum(m) for m in self.terms), default=-1)

    def degrees(self) -> tuple[int, ...]:
        """Maximum exponent of each variable."""
        out = [0] * self.arity
        for m in self.terms:
            for i, e in enumerate(m):
                if e > out[i]:
                    out[i] = e
        return tuple(out)

    def is_zero(self) -> bool:
        return not self.terms

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        """Terms in graded lexicographic order (ascending)."""
        return sorted(self.terms.items(), key=lambda t: _grlex_key(t[0]))

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.arity, Fraction(0))

    # -- ring operations ---------------------------------------------------

    def _coerce(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            if other.arity != self.arity:
                raise ArityError(f"arity mismatch: {self.arity} vs {other.arity}")
            return other
        if isinstance(other, (int, Fraction)):
            return SparsePoly.constant(self.arity, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return SparsePoly._wrap(self.arity, out)

    __radd__ = __add__

    def __neg__(self):
        return SparsePoly._wrap(self.arity, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = Fraction(other)
            if not c:
                return SparsePoly.zero(self.arity)
            return SparsePoly._wrap(self.arity, {m: v * c for m, v in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out: dict[Monomial, Fraction] = {}
        n = self.arity
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(m1[i] + m2[i] for i in range(n))
                out[m] = out.get(m, 0) + c1 * c2
        return SparsePoly._wrap(n, {m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (1 / Fraction(other))
        return NotImplemented

    def __pow__(self, n: int) -> "SparsePoly":
        if n < 0:
            raise ValueError("negative power")
        result = SparsePoly.constant(self.arity, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = SparsePoly.constant(self.arity, other)
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.arity == other.arity and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.arity, frozenset(self.terms.items())))
        return self._hash

    # -- substitution ------------------------------------------------------

    def compose(self, args: Sequence["SparsePoly"]) -> "SparsePoly":
        """Substitute ``args[i]`` for variable ``i``."""
        if len(args) != self.arity:
            raise ArityError(f"expected {self.arity} arguments, got {len(args)}")
        if not args:
            return self
        arity = args[0].arity
        if any(a.arity != arity for a in args):
            raise ArityError("substituted polynomials must share one arity")
        powers: list[dict[int, SparsePoly]] = [{0: SparsePoly.constant(arity, 1)} for _ in args]

        def power(i: int, e: int) -> SparsePoly:
            cache = powers[i]
            if e not in cache:
                cache[e] = power(i, e - 1) * args[i]
            return cache[e]

        out = SparsePoly.zero(arity)
        for m, c in self.sorted_terms():
            term = SparsePoly.constant(arity, c)
            for i, e in enumerate(m):
                if e:
                    term = term * power(i, e)
            out = out + term
        return out

    def permute(self, order: Sequence[int]) -> "SparsePoly":
        """``q(y) = p(y[order[0]], ..., y[order[n-1]])``."""
        if sorted(order) != list(range(self.arity)):
            raise ArityError(f"{order} is not a permutation of the variables")
        out = {}
        for m, c in self.terms.items():
            nm = [0] * self.arity
            for i, e in enumerate(m):
                nm[order[i]] += e
            out[tuple(nm)] = c
        return SparsePoly._wrap(self.arity, out)

    def affine_reparam(self, box: Sequence[tuple]) -> "SparsePoly":
        """``q(t) = p(lo + t*(hi - lo))`` coordinatewise; exact."""
        if len(box) != self.arity:
            raise ArityError("box dimension does not match arity")
        args = []
        for i, (lo, hi) in enumerate(box):
            lo, hi = Fraction(lo), Fraction(hi)
            if hi <= lo:
                raise DegenerateBox(f"coordinate {i} has width {hi - lo}")
            args.append(SparsePoly.constant(self.arity, lo) + SparsePoly.var(self.arity, i) * (hi - lo))
        return self._shift_scale(args)

    def _shift_scale(self, args: list["SparsePoly"]) -> "SparsePoly":
        # one variable at a time keeps intermediate sizes bounded
        n = self.arity
        cur = dict(self.terms)
        binom_cache: dict[int, list[int]] = {}
        for i, a in enumerate(args):
            lo = a.constant_term()
            unit = [0] * n
            unit[i] = 1
            scale = a.terms.get(tuple(unit), Fraction(0))
            nxt: dict[Monomial, Fraction] = {}
            for m, c in cur.items():
                e = m[i]
                row = binom_cache.get(e)
                if row is None:
                    row = [1]
                    for k in range(e):
                        row.append(row[-1] * (e - k) // (k + 1))
                    binom_cache[e] = row
                base = list(m)
                for k in range(e + 1):
                    coef = c * row[k] * scale**k * lo ** (e - k)
                    if coef:
                        base[i] = k
                        key = tuple(base)
                        nxt[key] = nxt.get(key, 0) + coef
            cur = {m: c for m, c in nxt.items() if c}
        return SparsePoly._wrap(n, cur)

    # -- evaluation --------------------------------------------------------

    def eval_exact(self, point: Sequence) -> Fraction:
        if len(point) != self.arity:
            raise ArityError(f"expected {self.arity} coordinates, got {len(point)}")
        x = [Fraction(v) for v in point]
        if self._scaled is None:
            den = 1
            for c in self.terms.values():
                den = den * c.denominator // math.gcd(den, c.denominator)
            self._scaled = (den, [(m, c.numerator * (den // c.denominator)) for m, c in self.terms.items()])
        den, scaled = self._scaled
        # integer evaluation: x_i = n_i / d_i, every term brought to d_i^k_i
        ks = self.degrees()
        num_pw: list[dict[int, int]] = [{} for _ in x]
        den_pw: list[dict[int, int]] = [{} for _ in x]
        total = 0
        for m, c in scaled:
            t = c
            for i, e in enumerate(m):
                k = ks[i]
                if e:
                    v = num_pw[i].get(e)
                    if v is None:
                        v = num_pw[i][e] = x[i].numerator ** e
                    t *= v
                if k - e:
                    v = den_pw[i].get(k - e)
                    if v is None:
                        v = den_pw[i][k - e] = x[i].denominator ** (k - e)
                    t *= v
            total += t
        scale = den
        for xi, k in zip(x, ks):
            scale *= xi.denominator**k
        return Fraction(total, scale)

    def eval_interval(self, box: Sequence, prec: int | None = None) -> Interval:
        """Enclosure of the range over ``box`` (naive term-by-term evaluation)."""
        if len(box) != self.arity:
            raise ArityError(f"expected {self.arity} coordinates, got {len(box)}")
        xs = [b if isinstance(b, Interval) else Interval.enclose(b[0], b[1], prec=prec) for b in box]
        pw: list[dict[int, Interval]] = [{} for _ in xs]
        total = Interval(0)
        for m, c in self.sorted_terms():
            t = to_interval(c, prec)
            for i, e in enumerate(m):
                if e:
                    v = pw[i].get(e)
                    if v is None:
                        v = pw[i][e] = interval_pow(xs[i], e, prec)
                    t = interval_mul(t, v, prec)
            total = interval_add(total, t, prec)
        return total

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "arity": self.arity,
            "terms": [[list(m), c.numerator, c.denominator] for m, c in self.sorted_terms()],
        }

    @classmethod
    def from_json(cls, data: Mapping | str) -> "SparsePoly":
        if isinstance(data, str):
            data = json.loads(data)
        arity = int(data["arity"])
        terms: dict[Monomial, Fraction] = {}
        for m, num, den in data["terms"]:
            m = tuple(int(e) for e in m)
            if m in terms:
                raise ValueError(f"duplicate monomial {m}")
            terms[m] = Fraction(int(num), int(den))
        return cls(arity, terms)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in reversed(self.sorted_terms()):
            mono = "*".join(
                f"x{i}" if e == 1 else f"x{i}^{e}" for i, e in enumerate(m) if e
            )
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def poly_sum(polys: Iterable[SparsePoly], arity: int) -> SparsePoly:
    out = SparsePoly.zero(arity)
    for p in polys:
        out = out + p
    return out
