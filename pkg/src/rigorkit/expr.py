"""Expression trees, interval evaluation and a bisection box verifier."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence, Union

from .numeric import (
    ConstantName,
    DomainError,
    Interval,
    enclose_constant,
    interval_add,
    interval_arctan,
    interval_div,
    interval_mul,
    interval_pow,
    interval_sqrt,
    interval_sub,
)
from .poly import SparsePoly


class DegenerateSimplex(ValueError):
    pass


# -- nodes -----------------------------------------------------------------


class Expr:
    """Base class.  Nodes are immutable and compare structurally."""

    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        return ()

    def arity(self) -> int:
        """One more than the largest variable index (0 if closed)."""
        best = -1
        stack = [self]
        seen = set()
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if isinstance(node, Var):
                best = max(best, node.index)
            stack.extend(node.children())
        return best + 1

    # operator sugar
    def __add__(self, o):
        return Add(self, as_expr(o))

    def __radd__(self, o):
        return Add(as_expr(o), self)

    def __sub__(self, o):
        return Sub(self, as_expr(o))

    def __rsub__(self, o):
        return Sub(as_expr(o), self)

    def __mul__(self, o):
        return Mul(self, as_expr(o))

    def __rmul__(self, o):
        return Mul(as_expr(o), self)

    def __truediv__(self, o):
        return Div(self, as_expr(o))

    def __rtruediv__(self, o):
        return Div(as_expr(o), self)

    def __pow__(self, n: int):
        return Pow(self, n)

    def __neg__(self):
        return Neg(self)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("variable index must be non-negative")


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Union[Fraction, ConstantName]

    def __post_init__(self):
        v = self.value
        if isinstance(v, ConstantName):
            return
        if isinstance(v, str):
            try:
                v = ConstantName.parse(v)
            except ValueError:
                v = Fraction(v)
        else:
            v = Fraction(v)
        object.__setattr__(self, "value", v)


@dataclass(frozen=True, eq=True)
class _Binary(Expr):
    a: Expr
    b: Expr

    def children(self):
        return (self.a, self.b)


class Add(_Binary):
    pass


class Sub(_Binary):
    pass


class Mul(_Binary):
    pass


class Div(_Binary):
    pass


@dataclass(frozen=True, eq=True)
class _Unary(Expr):
    a: Expr

    def children(self):
        return (self.a,)


class Neg(_Unary):
    pass


class Sqrt(_Unary):
    pass


class Arctan(_Unary):
    pass


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    a: Expr
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("Pow exponent must be a natural number")

    def children(self):
        return (self.a,)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(x)


def variables(n: int) -> list[Var]:
    return [Var(i) for i in range(n)]


def from_poly(p: SparsePoly, origin: Sequence | None = None) -> Expr:
    """Sum-of-monomials expression for a polynomial.

    With ``origin`` the monomials are in ``x_i - origin_i``.  The value is
    the same; near the origin the interval enclosure is much tighter.
    """
    vs: list[Expr] = list(variables(p.arity))
    if origin is not None:
        origin = [_q(o) for o in origin]
        shift = [SparsePoly.var(p.arity, i) + o for i, o in enumerate(origin)]
        p = p.compose(shift)
        vs = [Sub(v, Const(o)) if o else v for v, o in zip(vs, origin)]
    out: Expr | None = None
    for m, c in p.sorted_terms():
        term: Expr = Const(c)
        for i, e in enumerate(m):
            if e == 1:
                term = Mul(term, vs[i])
            elif e:
                term = Mul(term, Pow(vs[i], e))
        out = term if out is None else Add(out, term)
    return out if out is not None else Const(0)


# -- JSON --------------------------------------------------------------------

_TAGS = {
    Add: "add",
    Sub: "sub",
    Mul: "mul",
    Div: "div",
    Neg: "neg",
    Sqrt: "sqrt",
    Arctan: "atan",
}
_BY_TAG = {v: k for k, v in _TAGS.items()}


def to_json(e: Expr) -> dict:
    """Node-tagged JSON tree (see docs/formats.md)."""
    if isinstance(e, Var):
        return {"op": "var", "index": e.index}
    if isinstance(e, Const):
        if isinstance(e.value, ConstantName):
            return {"op": "const", "name": e.value.value}
        return {"op": "const", "value": str(e.value)}
    if isinstance(e, Pow):
        return {"op": "pow", "arg": to_json(e.a), "n": e.n}
    tag = _TAGS[type(e)]
    return {"op": tag, "args": [to_json(c) for c in e.children()]}


def from_json(data: Mapping | str, lets: Mapping[str, Expr] | None = None) -> Expr:
    """Inverse of :func:`to_json`.

    Besides the node tags, ``{"op": "ref", "name": ...}`` refers to an entry of
    ``lets`` (used by corpus files to share subterms).
    """
    if isinstance(data, str):
        data = json.loads(data)
    lets = lets or {}
    op = data.get("op")
    if op == "var":
        return Var(int(data["index"]))
    if op == "const":
        if "name" in data:
            return Const(ConstantName.parse(data["name"]))
        return Const(Fraction(str(data["value"])))
    if op == "pow":
        return Pow(from_json(data["arg"], lets), int(data["n"]))
    if op == "ref":
        name = data["name"]
        if name not in lets:
            raise ValueError(f"unknown reference {name!r}")
        return lets[name]
    if op in _BY_TAG:
        cls = _BY_TAG[op]
        args = [from_json(a, lets) for a in data["args"]]
        if issubclass(cls, _Unary):
            if len(args) != 1:
                raise ValueError(f"{op} takes one argument")
            return cls(args[0])
        if cls in (Add, Mul) and len(args) >= 2:
            out = args[0]
            for a in args[1:]:
                out = cls(out, a)
            return out
        if len(args) != 2:
            raise ValueError(f"{op} takes two arguments")
        return cls(args[0], args[1])
    raise ValueError(f"unknown node tag {op!r}")


# -- boxes -------------------------------------------------------------------


def _q(v) -> Fraction:
    # floats are read by their shortest repr, so 2.51 means 251/100
    return Fraction(repr(v)) if isinstance(v, float) else Fraction(v)


@dataclass(frozen=True)
class Box:
    """Closed box with rational corners."""

    bounds: tuple[tuple[Fraction, Fraction], ...]

    def __init__(self, bounds: Iterable[Sequence]):
        bs = []
        for lo, hi in bounds:
            lo, hi = _q(lo), _q(hi)
            if lo > hi:
                raise ValueError(f"empty coordinate [{lo}, {hi}]")
            bs.append((lo, hi))
        object.__setattr__(self, "bounds", tuple(bs))

    @classmethod
    def cube(cls, lo, hi, n: int) -> "Box":
        return cls([(lo, hi)] * n)

    def __len__(self):
        return len(self.bounds)

    def __iter__(self):
        return iter(self.bounds)

    def __getitem__(self, i):
        return self.bounds[i]

    def widths(self) -> list[Fraction]:
        return [hi - lo for lo, hi in self.bounds]

    def widest(self) -> int:
        w = self.widths()
        return max(range(len(w)), key=lambda i: (w[i], -i))

    def midpoint(self) -> list[Fraction]:
        return [(lo + hi) / 2 for lo, hi in self.bounds]

    def point_box(self) -> "Box":
        return Box((m, m) for m in self.midpoint())

    def split(self, axis: int) -> tuple["Box", "Box"]:
        lo, hi = self.bounds[axis]
        mid = (lo + hi) / 2
        left = list(self.bounds)
        right = list(self.bounds)
        left[axis] = (lo, mid)
        right[axis] = (mid, hi)
        return Box(left), Box(right)

    def intervals(self, prec: int | None = None) -> list[Interval]:
        return [Interval.enclose(lo, hi, prec=prec) for lo, hi in self.bounds]

    def contains(self, point: Sequence) -> bool:
        return all(lo <= Fraction(x) <= hi for x, (lo, hi) in zip(point, self.bounds))

    def to_json(self) -> list:
        return [[str(lo), str(hi)] for lo, hi in self.bounds]

    def __repr__(self):
        return "Box(" + " x ".join(f"[{lo}, {hi}]" for lo, hi in self.bounds) + ")"


# -- evaluation --------------------------------------------------------------


def eval_interval(e: Expr, box: Box | Sequence, precision: int = 64) -> Interval:
    """Natural interval extension of ``e`` over ``box``.

    Shared subtrees are evaluated once.  Domain violations raise
    :class:`DomainError` whose ``path`` lists the node tags from the root.
    """
    if isinstance(box, Box):
        xs = box.intervals(precision)
    else:
        xs = [b if isinstance(b, Interval) else Interval.enclose(b[0], b[1], prec=precision) for b in box]
    memo: dict[int, Interval] = {}

    def go(node: Expr, path: tuple) -> Interval:
        key = id(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Var):
            if node.index >= len(xs):
                raise IndexError(f"variable {node.index} not covered by the box")
            r = xs[node.index]
        elif isinstance(node, Const):
            if isinstance(node.value, ConstantName):
                r = enclose_constant(node.value, max(precision, 8))
            else:
                r = Interval.enclose(node.value, prec=precision)
        else:
            here = path + (_tag(node),)
            args = [go(c, here + (i,)) for i, c in enumerate(node.children())]
            try:
                r = _apply(node, args, precision)
            except DomainError as err:
                raise DomainError(str(err), here) from None
        memo[key] = r
        return r

    return go(e, ())


def _tag(node: Expr) -> str:
    return "pow" if isinstance(node, Pow) else _TAGS[type(node)]


def _apply(node: Expr, args: list[Interval], prec: int) -> Interval:
    if isinstance(node, Add):
        return interval_add(args[0], args[1], prec)
    if isinstance(node, Sub):
        return interval_sub(args[0], args[1], prec)
    if isinstance(node, Mul):
        return interval_mul(args[0], args[1], prec)
    if isinstance(node, Div):
        return interval_div(args[0], args[1], prec)
    if isinstance(node, Neg):
        return -args[0]
    if isinstance(node, Pow):
        return interval_pow(args[0], node.n, prec)
    if isinstance(node, Sqrt):
        return interval_sqrt(args[0], prec)
    if isinstance(node, Arctan):
        return interval_arctan(args[0], prec)
    raise TypeError(f"unknown node {node!r}")


def eval_exact(e: Expr, point: Sequence) -> Fraction:
    """Exact value of a rational expression (no sqrt, arctan or named constants)."""
    x = [Fraction(v) for v in point]
    memo: dict[int, Fraction] = {}

    def go(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            r = x[node.index]
        elif isinstance(node, Const):
            if isinstance(node.value, ConstantName):
                raise ValueError("expression is not rational")
            r = node.value
        elif isinstance(node, (Sqrt, Arctan)):
            raise ValueError("expression is not rational")
        else:
            args = [go(c) for c in node.children()]
            if isinstance(node, Add):
                r = args[0] + args[1]
            elif isinstance(node, Sub):
                r = args[0] - args[1]
            elif isinstance(node, Mul):
                r = args[0] * args[1]
            elif isinstance(node, Div):
                if not args[1]:
                    raise DomainError("division by zero")
                r = args[0] / args[1]
            elif isinstance(node, Neg):
                r = -args[0]
            else:
                r = args[0] ** node.n
        memo[key] = r
        return r

    return go(e)


def to_poly(e: Expr, arity: int | None = None) -> SparsePoly:
    """Expand a polynomial expression exactly.

    Division is only allowed by rational constants.
    """
    n = e.arity() if arity is None else arity
    memo: dict[int, SparsePoly] = {}

    def go(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            r = SparsePoly.var(n, node.index)
        elif isinstance(node, Const):
            if isinstance(node.value, ConstantName):
                raise ValueError(f"constant {node.value.value} is not rational")
            r = SparsePoly.constant(n, node.value)
        elif isinstance(node, (Sqrt, Arctan)):
            raise ValueError("expression is not polynomial")
        elif isinstance(node, Div):
            den = node.b
            if not isinstance(den, Const) or isinstance(den.value, ConstantName) or not den.value:
                raise ValueError("division by a non-constant is not polynomial")
            r = go(node.a) / den.value
        else:
            args = [go(c) for c in node.children()]
            if isinstance(node, Add):
                r = args[0] + args[1]
            elif isinstance(node, Sub):
                r = args[0] - args[1]
            elif isinstance(node, Mul):
                r = args[0] * args[1]
            elif isinstance(node, Neg):
                r = -args[0]
            else:
                r = args[0] ** node.n
        memo[key] = r
        return r

    return go(e)


# -- branch and bound --------------------------------------------------------


class Verdict(str, enum.Enum):
    PROVEN = "Proven"
    COUNTEREXAMPLE = "CounterexampleBox"
    BUDGET_EXHAUSTED = "BudgetExhausted"


@dataclass
class VerifyReport:
    verdict: Verdict
    boxes_examined: int = 0
    max_depth: int = 0
    witness: Box | None = None
    detail: dict = field(default_factory=dict)

    @property
    def proven(self) -> bool:
        return self.verdict is Verdict.PROVEN

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "boxes_examined": self.boxes_examined,
            "max_depth": self.max_depth,
            "witness": None if self.witness is None else self.witness.to_json(),
        }


def _verify(
    e: Expr,
    box: Box,
    bound: Fraction,
    budget: int,
    upper: bool,
    precision: int,
    assumptions: Sequence[Expr],
) -> VerifyReport:
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if isinstance(bound, Interval):
        bound_iv = bound
    elif isinstance(bound, ConstantName):
        bound_iv = enclose_constant(bound, precision)
    else:
        bound_iv = Interval.enclose(Fraction(bound), prec=precision)
    # the comparison must hold against every value of an enclosed bound
    safe = bound_iv.lo_q if upper else bound_iv.hi_q
    beyond = bound_iv.hi_q if upper else bound_iv.lo_q

    def settled(iv: Interval) -> bool:
        return iv.hi_q <= safe if upper else iv.lo_q >= safe

    def violated(iv: Interval) -> bool:
        return iv.lo_q > beyond if upper else iv.hi_q < beyond

    def vacuous(b: Box) -> bool:
        # some assumption (expr > 0) certainly fails on the whole box
        for a in assumptions:
            try:
                if eval_interval(a, b, precision).hi_q <= 0:
                    return True
            except DomainError:
                pass
        return False

    def assumptions_hold(b: Box) -> bool:
        for a in assumptions:
            try:
                if eval_interval(a, b, precision).lo_q <= 0:
                    return False
            except DomainError:
                return False
        return True

    stack: list[tuple[Box, int]] = [(box, 0)]
    examined = 0
    max_depth = 0
    while stack:
        if examined >= budget:
            return VerifyReport(Verdict.BUDGET_EXHAUSTED, examined, max_depth)
        b, depth = stack.pop()
        examined += 1
        max_depth = max(max_depth, depth)
        if assumptions and vacuous(b):
            continue
        try:
            iv = eval_interval(e, b, precision)
        except DomainError:
            if all(w == 0 for w in b.widths()):
                raise
            iv = None
        if iv is not None and settled(iv):
            continue
        pb = b.point_box()
        if not assumptions or assumptions_hold(pb):
            piv = eval_interval(e, pb, precision)
            if violated(piv):
                return VerifyReport(Verdict.COUNTEREXAMPLE, examined, max_depth, pb)
        if all(w == 0 for w in b.widths()):
            return VerifyReport(Verdict.BUDGET_EXHAUSTED, examined, max_depth)
        lo_half, hi_half = b.split(b.widest())
        stack.append((hi_half, depth + 1))
        stack.append((lo_half, depth + 1))
    return VerifyReport(Verdict.PROVEN, examined, max_depth)


def verify_upper(
    e: Expr,
    box: Box,
    bound,
    budget: int = 100_000,
    precision: int = 64,
    assumptions: Sequence[Expr] = (),
) -> VerifyReport:
    """Try to prove ``e(x) <= bound`` for all ``x`` in ``box``.

    Depth-first bisection of the widest coordinate (lowest index on ties);
    ``budget`` caps the number of boxes examined.  ``assumptions`` are
    expressions required to be positive: boxes where one is certainly
    non-positive are skipped.  A box whose evaluation hits a domain error is
    split further rather than rejected.
    """
    return _verify(e, box, bound, budget, True, precision, assumptions)


def verify_lower(
    e: Expr,
    box: Box,
    bound,
    budget: int = 100_000,
    precision: int = 64,
    assumptions: Sequence[Expr] = (),
) -> VerifyReport:
    """Dual of :func:`verify_upper`: prove ``e(x) >= bound``."""
    return _verify(e, box, bound, budget, False, precision, assumptions)


# -- simplex geometry -------------------------------------------------------


def delta_x(x: Sequence) -> Expr:
    """Cayley-Menger style volume polynomial in squared edge lengths.

    Works for any arguments supporting ring operations (Expr or SparsePoly).
    """
    x1, x2, x3, x4, x5, x6 = x
    return (
        x1 * x4 * (-x1 + x2 + x3 - x4 + x5 + x6)
        + x2 * x5 * (x1 - x2 + x3 + x4 - x5 + x6)
        + x3 * x6 * (x1 + x2 - x3 + x4 + x5 - x6)
        - x2 * x3 * x4
        - x1 * x3 * x5
        - x1 * x2 * x6
        - x4 * x5 * x6
    )


def delta4_x(x: Sequence) -> Expr:
    """Partial derivative of :func:`delta_x` with respect to ``x4``."""
    x1, x2, x3, x4, x5, x6 = x
    return (
        -x2 * x3
        - x1 * x4
        + x2 * x5
        + x3 * x6
        - x5 * x6
        + x1 * (-x1 + x2 + x3 - x4 + x5 + x6)
    )


def dihedral_expr(y: Sequence[Expr]) -> tuple[Expr, Expr]:
    """(dihedral angle along edge 1, Delta) as expressions in edge lengths.

    Edge convention: ``y1..y3`` leave vertex 0, ``y4`` is opposite ``y1``,
    ``y5`` opposite ``y2`` and ``y6`` opposite ``y3``.
    """
    x = [Pow(as_expr(v), 2) for v in y]
    d = delta_x(x)
    ang = Const(ConstantName.PI) / 2 + Arctan(-delta4_x(x) / Sqrt(4 * x[0] * d))
    return ang, d


def dihedral_from_edges(*edges, precision: int = 64) -> Interval:
    """Enclosure of the dihedral angle along the first edge of a tetrahedron.

    Accepts six intervals (or numbers).  Raises :class:`DegenerateSimplex`
    unless the volume polynomial is certified positive.
    """
    if len(edges) == 1:
        edges = tuple(edges[0])
    if len(edges) != 6:
        raise ValueError("six edge lengths required")
    ivs = [e if isinstance(e, Interval) else Interval.enclose(e, prec=precision) for e in edges]
    ang, d = dihedral_expr(variables(6))
    dv = eval_interval(d, ivs, precision)
    if dv.lo_q <= 0:
        raise DegenerateSimplex(f"cannot certify a nondegenerate simplex: Delta in {dv}")
    return eval_interval(ang, ivs, precision)
