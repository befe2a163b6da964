"""The tetrahedral functions, their polynomial surrogate and its certificates.

Coefficients that involve sqrt(2), A = arctan(sqrt(2)/5) and L = pi - 4A are
kept symbolically in :class:`SymPoly`, a map from basis monomials
``sqrt2^s * A^a * L^l`` (``s`` in {0, 1}, ``l`` possibly negative) to rational
polynomials.  The rational part of ``sqrt2 * (g - pt)`` is then read off
exactly, which is what makes the Bernstein certificate rounding-free.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .bernstein import bernstein_verify, range_enclosure
from .expr import (
    Arctan,
    Box,
    Const,
    Expr,
    Sqrt,
    Var,
    Verdict,
    VerifyReport,
    delta_x,
    eval_interval,
    variables,
    verify_lower,
)
from .numeric import ConstantName, Interval, enclose_constant, interval_div, interval_mul
from .poly import SparsePoly

Key = tuple[int, int, int]
ONE: Key = (0, 0, 0)
SQRT2: Key = (1, 0, 0)
ATAN: Key = (0, 1, 0)

KEPLER_BOX = Box.cube(2, Fraction(251, 100), 6)
DELTA_RANGE = (Fraction(128), Fraction(501))

# a1..a3 are a0 with its arguments permuted (0-based positions)
A_PERMUTATIONS = {
    "A0": (0, 1, 2, 3, 4, 5),
    "A1": (0, 4, 5, 3, 1, 2),
    "A2": (1, 3, 5, 4, 0, 2),
    "A3": (3, 4, 2, 0, 1, 5),
}


class ConstructionError(RuntimeError):
    pass


# -- symbolic coefficient ring ----------------------------------------------


def _key_mul(k1: Key, k2: Key) -> tuple[Key, int]:
    s = k1[0] + k2[0]
    factor = 1
    if s == 2:
        s, factor = 0, 2
    return (s, k1[1] + k2[1], k1[2] + k2[2]), factor


class SymPoly:
    """Polynomial whose coefficients lie in Q[sqrt2, A, L, 1/L]."""

    __slots__ = ("arity", "parts")

    def __init__(self, arity: int, parts: dict[Key, SparsePoly] | None = None):
        self.arity = arity
        self.parts = {k: p for k, p in (parts or {}).items() if not p.is_zero()}

    @classmethod
    def rational(cls, p: SparsePoly) -> "SymPoly":
        return cls(p.arity, {ONE: p})

    @classmethod
    def scalar(cls, arity: int, c, key: Key = ONE) -> "SymPoly":
        return cls(arity, {key: SparsePoly.constant(arity, c)})

    def _lift(self, other) -> "SymPoly":
        if isinstance(other, SymPoly):
            return other
        if isinstance(other, SparsePoly):
            return SymPoly.rational(other)
        return SymPoly.scalar(self.arity, other)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.parts)
        for k, p in other.parts.items():
            out[k] = out[k] + p if k in out else p
        return SymPoly(self.arity, out)

    __radd__ = __add__

    def __neg__(self):
        return SymPoly(self.arity, {k: -p for k, p in self.parts.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        out: dict[Key, SparsePoly] = {}
        for (k1, p1), (k2, p2) in itertools.product(self.parts.items(), other.parts.items()):
            k, f = _key_mul(k1, k2)
            term = p1 * p2
            if f != 1:
                term = term * f
            out[k] = out[k] + term if k in out else term
        return SymPoly(self.arity, out)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "SymPoly":
        return self * (1 / Fraction(c))

    def __pow__(self, n: int) -> "SymPoly":
        out = SymPoly.scalar(self.arity, 1)
        for _ in range(n):
            out = out * self
        return out

    def is_zero(self) -> bool:
        return not self.parts

    def is_rational(self) -> bool:
        return set(self.parts) <= {ONE}

    def rational_part(self) -> SparsePoly:
        return self.parts.get(ONE, SparsePoly.zero(self.arity))

    def degree(self) -> int:
        return max((p.total_degree() for p in self.parts.values()), default=-1)

    def compose1(self, arg: "SymPoly") -> "SymPoly":
        """Substitute ``arg`` into a univariate symbolic polynomial."""
        if self.arity != 1:
            raise ValueError("compose1 needs a univariate polynomial")
        out = SymPoly(arg.arity)
        powers = [SymPoly.scalar(arg.arity, 1)]
        for key, p in self.parts.items():
            basis = SymPoly.scalar(arg.arity, 1, key)
            acc = SymPoly(arg.arity)
            for (e,), c in p.terms.items():
                while len(powers) <= e:
                    powers.append(powers[-1] * arg)
                acc = acc + powers[e] * c
            out = out + basis * acc
        return out

    def eval_at(self, point: Sequence) -> "SymPoly":
        """Exact value at a rational point, as an arity-0 symbolic scalar."""
        return SymPoly(0, {k: SparsePoly.constant(0, p.eval_exact(point)) for k, p in self.parts.items()})

    def coefficient_of(self, monomial: tuple) -> "SymPoly":
        return SymPoly(0, {k: SparsePoly.constant(0, p.terms.get(tuple(monomial), 0)) for k, p in self.parts.items()})

    def enclose(self, prec: int = 64) -> Interval:
        """Interval enclosure of an arity-0 element."""
        if self.arity != 0:
            raise ValueError("enclose needs a scalar")
        total = Interval(0)
        for k, p in self.parts.items():
            total = total + interval_mul(basis_interval(k, prec), Interval.enclose(p.constant_term(), prec=prec), prec)
        return total

    def divide_linear(self, t0: Fraction) -> tuple["SymPoly", "SymPoly"]:
        """Quotient and remainder of division by ``(t - t0)`` (univariate)."""
        if self.arity != 1:
            raise ValueError("divide_linear needs a univariate polynomial")
        quot: dict[Key, SparsePoly] = {}
        rem: dict[Key, SparsePoly] = {}
        t0 = Fraction(t0)
        for k, p in self.parts.items():
            deg = p.total_degree()
            coeffs = [p.terms.get((i,), Fraction(0)) for i in range(deg + 1)]
            q = [Fraction(0)] * max(deg, 0)
            carry = Fraction(0)
            for i in range(deg, 0, -1):
                carry = coeffs[i] + carry * t0 if i < deg else coeffs[i]
                q[i - 1] = carry
            r = coeffs[0] + (carry * t0 if deg > 0 else 0)
            quot[k] = SparsePoly(1, {(i,): c for i, c in enumerate(q)})
            rem[k] = SparsePoly.constant(1, r)
        return SymPoly(1, quot), SymPoly(1, rem)

    def to_expr(self) -> Expr:
        """Expression with named constants (for interval evaluation)."""
        from .expr import from_poly

        out: Expr | None = None
        for k, p in sorted(self.parts.items()):
            term = from_poly(p) if k == ONE else basis_expr(k) * from_poly(p)
            out = term if out is None else out + term
        return out if out is not None else Const(0)

    def __eq__(self, other):
        if not isinstance(other, SymPoly):
            return NotImplemented
        return (self - other).is_zero()

    def __repr__(self):
        names = {ONE: "1", SQRT2: "sqrt2", ATAN: "A"}
        parts = []
        for k, p in sorted(self.parts.items()):
            tag = names.get(k, f"sqrt2^{k[0]}*A^{k[1]}*L^{k[2]}")
            parts.append(f"({p})*{tag}")
        return " + ".join(parts) if parts else "0"


def basis_interval(k: Key, prec: int = 64) -> Interval:
    s, a, l = k
    out = Interval(1)
    if s:
        out = interval_mul(out, enclose_constant(ConstantName.SQRT2, prec), prec)
    at = enclose_constant(ConstantName.ATAN_SQRT2_OVER_5, prec)
    for _ in range(a):
        out = interval_mul(out, at, prec)
    big_l = enclose_constant(ConstantName.PI, prec) - at * 4
    for _ in range(abs(l)):
        out = interval_mul(out, big_l, prec) if l > 0 else interval_div(out, big_l, prec)
    return out


def basis_expr(k: Key) -> Expr:
    s, a, l = k
    out: Expr = Const(1)
    if s:
        out = out * Const(ConstantName.SQRT2)
    for _ in range(a):
        out = out * Const(ConstantName.ATAN_SQRT2_OVER_5)
    big_l = Const(ConstantName.PI) - 4 * Const(ConstantName.ATAN_SQRT2_OVER_5)
    for _ in range(abs(l)):
        out = out * big_l if l > 0 else out / big_l
    return out


def sym_constant(name: ConstantName, arity: int = 0) -> SymPoly:
    """Exact symbolic form of a named constant."""
    name = ConstantName.parse(name) if isinstance(name, str) else name
    if name is ConstantName.SQRT2:
        return SymPoly.scalar(arity, 1, SQRT2)
    if name is ConstantName.ATAN_SQRT2_OVER_5:
        return SymPoly.scalar(arity, 1, ATAN)
    big_l = SymPoly.scalar(arity, 1, (0, 0, 1))
    atan = SymPoly.scalar(arity, 1, ATAN)
    if name is ConstantName.PI:
        return big_l + atan * 4
    if name is ConstantName.PT:
        # -pi/3 + 4A = -L/3 + 8A/3
        return big_l * Fraction(-1, 3) + atan * Fraction(8, 3)
    # DELTA_OCT = L / (2 sqrt2) = L sqrt2 / 4
    return SymPoly.scalar(arity, Fraction(1, 4), (1, 0, 1))


# -- geometric functions -----------------------------------------------------


def _det(m: list[list[SparsePoly]]) -> SparsePoly:
    n = len(m)
    total = SparsePoly.zero(m[0][0].arity)
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = SparsePoly.constant(total.arity, -1 if inv % 2 else 1)
        for i in range(n):
            entry = m[i][perm[i]]
            if entry.is_zero():
                break
            term = term * entry
        else:
            total = total + term
    return total


def delta_poly() -> SparsePoly:
    """Half the 5x5 Cayley-Menger determinant in the edge lengths y1..y6."""
    y = SparsePoly.variables(6)
    sq = [v * v for v in y]
    x1, x2, x3, x4, x5, x6 = sq
    one = SparsePoly.constant(6, 1)
    zero = SparsePoly.zero(6)
    m = [
        [zero, one, one, one, one],
        [one, zero, x3, x2, x1],
        [one, x3, zero, x4, x5],
        [one, x2, x4, zero, x6],
        [one, x1, x5, x6, zero],
    ]
    return _det(m) / 2


def a0_poly() -> SparsePoly:
    y1, y2, y3, y4, y5, y6 = SparsePoly.variables(6)
    half = Fraction(1, 2)
    return y1 * y2 * y3 + (
        y1 * y1 * y2
        + y1 * y2 * y2
        + y1 * y1 * y3
        + y2 * y2 * y3
        + y1 * y3 * y3
        + y2 * y3 * y3
        - y1 * y4 * y4
        - y2 * y5 * y5
        - y3 * y6 * y6
    ) * half


def a_poly(name: str) -> SparsePoly:
    y = SparsePoly.variables(6)
    return a0_poly().compose([y[i] for i in A_PERMUTATIONS[name]])


def delta_expr(y: Sequence[Expr] | None = None) -> Expr:
    y = variables(6) if y is None else y
    return delta_x([v * v for v in y])


def a_expr(name: str, y: Sequence[Expr] | None = None) -> Expr:
    y = variables(6) if y is None else y
    y1, y2, y3, y4, y5, y6 = (y[i] for i in A_PERMUTATIONS[name])
    return y1 * y2 * y3 + Fraction(1, 2) * (
        y1 * y1 * y2
        + y1 * y2 * y2
        + y1 * y1 * y3
        + y2 * y2 * y3
        + y1 * y3 * y3
        + y2 * y3 * y3
        - y1 * y4 * y4
        - y2 * y5 * y5
        - y3 * y6 * y6
    )


class FunctionName(str, enum.Enum):
    DELTA = "DELTA"
    A0 = "A0"
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    GAMMA = "GAMMA"


@dataclass(frozen=True)
class GeometricFunction:
    name: FunctionName
    expr: Expr
    poly: SparsePoly | None
    arity: int = 6


def geometric_function(name: FunctionName | str) -> GeometricFunction:
    name = FunctionName(name)
    if name is FunctionName.DELTA:
        return GeometricFunction(name, delta_expr(), delta_poly())
    if name is FunctionName.GAMMA:
        return GeometricFunction(name, build_gamma(), None)
    return GeometricFunction(name, a_expr(name.value), a_poly(name.value))


def build_gamma() -> Expr:
    """gamma(y) = -delta_oct/12 sqrt(Delta) + 2/3 sum_i arctan(sqrt(Delta) / (2 a_i))."""
    y = variables(6)
    root = Sqrt(delta_expr(y))
    total: Expr | None = None
    for name in A_PERMUTATIONS:
        term = Arctan(root / (2 * a_expr(name, y)))
        total = term if total is None else total + term
    return -(Const(ConstantName.DELTA_OCT) * root) / 12 + Fraction(2, 3) * total


# -- approximations ----------------------------------------------------------


class ApproxName(str, enum.Enum):
    ATAN_UPPER = "ATAN_UPPER"
    RCP_UPPER = "RCP_UPPER"
    SQRT_LOWER = "SQRT_LOWER"
    SQRT_UPPER = "SQRT_UPPER"


@dataclass(frozen=True)
class Approximation:
    name: ApproxName
    body: SymPoly
    upper: bool
    # points where the approximation touches its target (known roots of the residual)
    anchors: tuple[Fraction, ...] = ()
    domain: tuple[Interval, bool] | None = None

    def with_domain(self, dom: Interval, reconstructed: bool) -> "Approximation":
        return Approximation(self.name, self.body, self.upper, self.anchors, (dom, reconstructed))


def _t() -> SymPoly:
    return SymPoly.rational(SparsePoly.var(1, 0))


def approximation(name: ApproxName | str) -> Approximation:
    name = ApproxName(name)
    t = _t()
    s2 = sym_constant(ConstantName.SQRT2, 1)
    if name is ApproxName.ATAN_UPPER:
        body = sym_constant(ConstantName.ATAN_SQRT2_OVER_5, 1) + (t - s2 / 5) * Fraction(25, 27)
        return Approximation(name, body, True)
    if name is ApproxName.RCP_UPPER:
        tp = SparsePoly.var(1, 0)
        body = (
            Fraction(1, 4)
            - tp * Fraction(37, 1600)
            + tp * tp / 1000
            - tp**3 * Fraction(13, 640000)
            + tp**4 / 6400000
        )
        return Approximation(name, SymPoly.rational(body), True, (Fraction(20), Fraction(40)))
    if name is ApproxName.SQRT_LOWER:
        inv_l = SymPoly.scalar(1, Fraction(3, 64), (0, 0, -1))
        body = s2 * 8 + inv_l * (t - 128)
        return Approximation(name, body, False, (Fraction(128),))
    body = s2 * 8 + s2 * Fraction(1, 32) * (t - 128)
    return Approximation(name, body, True, (Fraction(128),))


def _s2_over_5() -> SymPoly:
    return SymPoly.scalar(1, Fraction(1, 5), SQRT2)


# -- surrogate ---------------------------------------------------------------


def _geometry_sym() -> tuple[SymPoly, list[SymPoly]]:
    d = SymPoly.rational(delta_poly())
    a = [SymPoly.rational(a_poly(n)) for n in A_PERMUTATIONS]
    return d, a


def build_surrogate_g() -> SymPoly:
    """g = -delta_oct/12 sqrt_lo(D) + 2/3 sum_i atan_up(sqrt_up(D) * rcp_up(a_i) / 2)."""
    d, a = _geometry_sym()
    sqrt_lo = approximation(ApproxName.SQRT_LOWER).body
    sqrt_up = approximation(ApproxName.SQRT_UPPER).body
    rcp = approximation(ApproxName.RCP_UPPER).body
    atan_up = approximation(ApproxName.ATAN_UPPER).body
    root_up = sqrt_up.compose1(d)
    total = SymPoly(6)
    for ai in a:
        arg = root_up * rcp.compose1(ai) * Fraction(1, 2)
        total = total + atan_up.compose1(arg)
    delta_oct = sym_constant(ConstantName.DELTA_OCT, 6)
    return -(delta_oct * sqrt_lo.compose1(d)) * Fraction(1, 12) + total * Fraction(2, 3)


def build_p(g: SymPoly | None = None) -> SparsePoly:
    """The rational polynomial sqrt2 * (g - pt)."""
    g = build_surrogate_g() if g is None else g
    p = sym_constant(ConstantName.SQRT2, 6) * (g - sym_constant(ConstantName.PT, 6))
    if not p.is_rational():
        bad = sorted(k for k in p.parts if k != ONE)
        raise ConstructionError(f"non-rational parts survive cancellation: {bad}")
    return p.rational_part()


def p_expr() -> Expr:
    """Compact expression for the same polynomial (used by the corpus file).

    sqrt2 * (g - pt) simplifies to
    -(D - 128)/512 + 100/81 * sum_i ((D + 128) * rcp(a_i)/64 - 1/5).
    """
    y = variables(6)
    d = delta_expr(y)
    total: Expr | None = None
    for name in A_PERMUTATIONS:
        ai = a_expr(name, y)
        r = _rcp_expr(ai)
        term = (d + 128) * r / 64 - Fraction(1, 5)
        total = term if total is None else total + term
    return -(d - 128) / 512 + Fraction(100, 81) * total


def _rcp_expr(t: Expr) -> Expr:
    return (
        Fraction(1, 4)
        - Fraction(37, 1600) * t
        + t * t / 1000
        - Fraction(13, 640000) * t**3
        + t**4 / 6400000
    )


# -- validation --------------------------------------------------------------


def a_range(tolerance=Fraction(1, 1000)) -> Interval:
    """Enclosure of a0 over [2, 2.51]^6 (a1..a3 share it: the box is symmetric)."""
    return range_enclosure(a0_poly(), list(KEPLER_BOX), tolerance)


def delta_range(tolerance=Fraction(1, 1000)) -> Interval:
    return range_enclosure(delta_poly(), list(KEPLER_BOX), tolerance)


def atan_argument_range(a_dom: Interval | None = None, d_dom: Interval | None = None) -> Interval:
    """Enclosure of sqrt_up(D) * rcp_up(a)/2 over the box (interval product)."""
    a_dom = a_range() if a_dom is None else a_dom
    d_dom = delta_range() if d_dom is None else d_dom
    rcp = approximation(ApproxName.RCP_UPPER).body.rational_part()
    r = range_enclosure(rcp, [(a_dom.lo_q, a_dom.hi_q)], Fraction(1, 10**6))
    sqrt_up = approximation(ApproxName.SQRT_UPPER).body
    # sqrt_up(t) = sqrt2 (t + 128)/32 is increasing
    lo = sqrt_up.eval_at([d_dom.lo_q]).enclose() * r.lo_q / 2
    hi = sqrt_up.eval_at([d_dom.hi_q]).enclose() * r.hi_q / 2
    return Interval._raw(lo.lo, hi.hi)


def default_domain(name: ApproxName) -> tuple[Interval, bool]:
    """(validity domain, reconstructed?) for each approximation."""
    if name in (ApproxName.SQRT_LOWER, ApproxName.SQRT_UPPER):
        return Interval(*DELTA_RANGE), False
    if name is ApproxName.RCP_UPPER:
        return a_range(), True
    return atan_argument_range(), True


def _prove_sign(h: SymPoly, lo: Fraction, hi: Fraction, nonneg: bool, budget: int) -> VerifyReport:
    box = Box([(lo, hi)])
    if h.is_rational():
        return bernstein_verify(h.rational_part(), box, 0, upper=not nonneg, budget=budget)
    e = h.to_expr()
    if nonneg:
        return verify_lower(e, box, 0, budget)
    from .expr import verify_upper

    return verify_upper(e, box, 0, budget)


def prove_residual(h: SymPoly, lo, hi, anchors: Sequence[Fraction], budget: int) -> VerifyReport:
    """Prove ``h >= 0`` on [lo, hi] after dividing out roots at the anchors.

    Each anchor root ``t0`` is removed exactly; the product of removed linear
    factors has a known sign on the interval (even multiplicity, or ``t0``
    outside the interval), so the claim reduces to a sign condition on the
    quotient.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    sign = 1
    q = h
    for t0 in anchors:
        mult = 0
        while not q.is_zero():
            quot, rem = q.divide_linear(t0)
            if not rem.is_zero():
                break
            q, mult = quot, mult + 1
        if mult % 2 == 0:
            continue
        if t0 <= lo:
            continue
        if t0 >= hi:
            sign = -sign
            continue
        # odd-multiplicity root strictly inside: h changes sign there
        return VerifyReport(Verdict.COUNTEREXAMPLE, 0, 0, Box([(t0, t0)]), {"reason": "sign change at anchor"})
    return _prove_sign(q, lo, hi, sign > 0, budget)


def _merge(reports: Sequence[VerifyReport]) -> VerifyReport:
    for r in reports:
        if not r.proven:
            return r
    return VerifyReport(
        Verdict.PROVEN,
        sum(r.boxes_examined for r in reports),
        max((r.max_depth for r in reports), default=0),
    )


def validate_approximation(a: Approximation | ApproxName | str, budget: int = 10_000) -> VerifyReport:
    """Machine-check that an approximation bounds its target on its domain."""
    if not isinstance(a, Approximation):
        a = approximation(a)
    dom, reconstructed = a.domain if a.domain is not None else default_domain(a.name)
    lo, hi = dom.lo_q, dom.hi_q
    t = _t()
    detail = {"domain": [str(lo), str(hi)], "reconstructed": reconstructed}

    if a.name is ApproxName.ATAN_UPPER:
        report = _validate_tangent_atan(a, lo, hi)
    elif a.name is ApproxName.RCP_UPPER:
        if lo <= 0:
            return VerifyReport(Verdict.COUNTEREXAMPLE, 0, 0, Box([(lo, lo)]), detail)
        # rcp(t) >= 1/t  <=>  t * rcp(t) - 1 >= 0 for t > 0
        report = prove_residual(t * a.body - 1, lo, hi, a.anchors, budget)
    elif a.name is ApproxName.SQRT_UPPER:
        # sqrt(t) <= s(t)  <=>  s(t) >= 0 and s(t)^2 - t >= 0
        report = _merge(
            [
                prove_residual(a.body * SymPoly.scalar(1, 1, SQRT2), lo, hi, (), budget),
                prove_residual(a.body * a.body - t, lo, hi, a.anchors, budget),
            ]
        )
    else:
        # s(t) <= sqrt(t)  <=  s(t) >= 0 and t - s(t)^2 >= 0
        report = _merge(
            [
                prove_residual(a.body, lo, hi, (), budget),
                prove_residual(t - a.body * a.body, lo, hi, a.anchors, budget),
            ]
        )
    report.detail.update(detail)
    return report


def _validate_tangent_atan(a: Approximation, lo: Fraction, hi: Fraction) -> VerifyReport:
    """Tangent-line certificate for an upper bound of arctan.

    With h = body - arctan: h(t0) = 0 and h'(t0) = 0 at t0 = sqrt2/5 (both
    exact symbolic identities), and h'' = 2t / (1 + t^2)^2 >= 0 on [0, inf).
    A convex function with a zero-slope zero is non-negative, so it suffices
    to check t >= 0 on the hull of the domain and t0.
    """
    t0 = _s2_over_5()
    body = a.body
    value = body.compose1(t0) - SymPoly.scalar(1, 1, ATAN)
    slope = body.coefficient_of((1,))
    # d/dt arctan at t0 is 1/(1 + t0^2) = 25/27 since t0^2 = 2/25
    t0_sq = (t0 * t0).rational_part().constant_term()
    target_slope = 1 / (1 + t0_sq)
    exact = value.is_zero() and slope == SymPoly.scalar(0, target_slope) and body.degree() == 1
    if not exact:
        return VerifyReport(Verdict.COUNTEREXAMPLE, 0, 0, None, {"reason": "not tangent at sqrt2/5"})
    hull_lo = min(lo, Fraction(1, 4))
    return verify_lower(Var(0), Box([(hull_lo, max(hi, Fraction(3, 10)))]), 0, budget=16)
