"""Tensor-product Bernstein coefficients on the unit box.

Coefficients are kept as a numpy object array of Python integers together
with a single positive integer denominator, so every operation is exact and
the hot loops are vectorized slice additions.
"""

from __future__ import annotations

import heapq
import itertools
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .numeric import Interval
from .poly import ArityError, SparsePoly

MAX_ENTRIES = 20_000_000


class BudgetExhausted(Exception):
    """Raised by :func:`range_enclosure`; ``enclosure`` is the best interval found."""

    def __init__(self, enclosure: Interval, boxes: int):
        super().__init__(f"budget exhausted after {boxes} boxes; best enclosure {enclosure}")
        self.enclosure = enclosure
        self.boxes = boxes


def _lcm(values: Sequence[int]) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def _pascal_pass(arr: np.ndarray, axis: int) -> None:
    """In place: ``a[i] <- sum_j C(i, j) a[j]`` along ``axis``."""
    k = arr.shape[axis] - 1
    view = np.moveaxis(arr, axis, 0)
    for s in range(k):
        view[s + 1 :] = view[s + 1 :] + view[s:-1]


def _axis_weights(shape: tuple[int, ...], axis: int, weights: Sequence[int]) -> np.ndarray:
    w = np.array([int(v) for v in weights], dtype=object)
    ext = [1] * len(shape)
    ext[axis] = len(weights)
    return w.reshape(ext)


class BernsteinTensor:
    """Bernstein coefficients ``numer / denom`` of a polynomial on ``[0,1]^n``."""

    __slots__ = ("numer", "denom")

    def __init__(self, numer: np.ndarray, denom: int = 1):
        if denom <= 0:
            raise ValueError("denominator must be positive")
        if numer.size > MAX_ENTRIES:
            raise MemoryError(f"tensor with {numer.size} entries exceeds {MAX_ENTRIES}")
        self.numer = numer
        self.denom = int(denom)

    @classmethod
    def from_fractions(cls, coeffs) -> "BernsteinTensor":
        arr = np.array(coeffs, dtype=object)
        flat = [Fraction(c) for c in arr.flat]
        den = _lcm([c.denominator for c in flat]) if flat else 1
        num = np.array([c.numerator * (den // c.denominator) for c in flat], dtype=object)
        return cls(num.reshape(arr.shape), den)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(s - 1 for s in self.numer.shape)

    @property
    def arity(self) -> int:
        return self.numer.ndim

    def coeff(self, index: Sequence[int]) -> Fraction:
        return Fraction(int(self.numer[tuple(index)]), self.denom)

    @property
    def coeffs(self) -> np.ndarray:
        """Dense array of :class:`Fraction` (convenient for small tensors)."""
        out = np.empty(self.numer.shape, dtype=object)
        for idx, v in np.ndenumerate(self.numer):
            out[idx] = Fraction(int(v), self.denom)
        return out

    def bound_max(self) -> Fraction:
        return Fraction(int(self.numer.max()), self.denom)

    def bound_min(self) -> Fraction:
        return Fraction(int(self.numer.min()), self.denom)

    def corner(self, upper: Sequence[bool]) -> Fraction:
        """Exact value at a vertex of the unit box (endpoint interpolation)."""
        idx = tuple(k if u else 0 for k, u in zip(self.degrees, upper))
        return self.coeff(idx)

    def corner_values(self) -> list[Fraction]:
        sl = tuple(slice(None, None, k if k else 1) for k in self.degrees)
        return [Fraction(int(v), self.denom) for v in self.numer[sl].flat]

    def reduced(self) -> "BernsteinTensor":
        g = self.denom
        for v in self.numer.flat:
            g = math.gcd(g, int(v))
            if g == 1:
                return self
        return BernsteinTensor(self.numer // g, self.denom // g)

    def evaluate(self, point: Sequence) -> Fraction:
        if len(point) != self.arity:
            raise ArityError(f"expected {self.arity} coordinates, got {len(point)}")
        arr = self.numer
        for x in point:
            x = Fraction(x)
            k = arr.shape[0] - 1
            basis = np.array(
                [math.comb(k, i) * x**i * (1 - x) ** (k - i) for i in range(k + 1)], dtype=object
            )
            arr = np.tensordot(basis, arr, axes=([0], [0]))
        return Fraction(arr.item() if isinstance(arr, np.ndarray) else arr) / self.denom

    def subdivide(self, axis: int) -> tuple["BernsteinTensor", "BernsteinTensor"]:
        """Split at the midpoint of ``axis`` (de Casteljau); halves rescaled to [0,1]."""
        if not 0 <= axis < self.arity:
            raise ArityError(f"axis {axis} out of range")
        k = self.degrees[axis]
        src = np.moveaxis(self.numer, axis, 0)
        left = np.empty_like(src)
        right = np.empty_like(src)
        # unnormalized pyramid: level r holds 2^r times the true de Casteljau values
        cur = src.copy()
        left[0] = cur[0] * (1 << k)
        right[k] = cur[k] * (1 << k)
        for r in range(1, k + 1):
            cur = cur[:-1] + cur[1:]
            left[r] = cur[0] * (1 << (k - r))
            right[k - r] = cur[-1] * (1 << (k - r))
        den = self.denom << k
        return (
            BernsteinTensor(np.moveaxis(left, 0, axis), den),
            BernsteinTensor(np.moveaxis(right, 0, axis), den),
        )

    def elevate(self, axis: int) -> "BernsteinTensor":
        """Raise the degree along ``axis`` by one; same polynomial."""
        k = self.degrees[axis]
        src = np.moveaxis(self.numer, axis, 0)
        out = np.empty((k + 2,) + src.shape[1:], dtype=object)
        out[0] = src[0] * (k + 1)
        out[k + 1] = src[k] * (k + 1)
        for i in range(1, k + 1):
            out[i] = src[i - 1] * i + src[i] * (k + 1 - i)
        return BernsteinTensor(np.moveaxis(out, 0, axis), self.denom * (k + 1))

    def spread(self, axis: int) -> int:
        """Largest coefficient jump along ``axis`` (numerator units)."""
        if self.numer.shape[axis] < 2:
            return 0
        d = np.diff(self.numer, axis=axis)
        return int(max(d.max(), -d.min()))

    def to_json(self) -> dict:
        return {
            "degrees": list(self.degrees),
            "denominator": self.denom,
            "numerators": [int(v) for v in self.numer.flat],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BernsteinTensor":
        shape = tuple(k + 1 for k in data["degrees"])
        num = np.array([int(v) for v in data["numerators"]], dtype=object).reshape(shape)
        return cls(num, int(data["denominator"]))

    def __eq__(self, other):
        if not isinstance(other, BernsteinTensor):
            return NotImplemented
        if self.numer.shape != other.numer.shape:
            return False
        return bool(np.all(self.numer * other.denom == other.numer * self.denom))

    def __repr__(self):
        return f"BernsteinTensor(degrees={self.degrees}, denom={self.denom})"


def to_bernstein(p: SparsePoly, degrees: Sequence[int] | None = None) -> BernsteinTensor:
    """Exact conversion of ``p`` (read on the unit box) to Bernstein form.

    ``degrees`` defaults to the per-variable maximum exponents of ``p``.
    Uses ``b_i = sum_{j<=i} C(i,j)/C(k,j) a_j`` per axis, evaluated as a
    column scaling followed by Pascal prefix passes.
    """
    ks = list(p.degrees() if degrees is None else degrees)
    if len(ks) != p.arity:
        raise ArityError("degree vector does not match arity")
    for m in p.terms:
        if any(e > k for e, k in zip(m, ks)):
            raise ValueError(f"monomial {m} exceeds degrees {ks}")
    shape = tuple(k + 1 for k in ks)
    size = math.prod(shape)
    if size > MAX_ENTRIES:
        raise MemoryError(f"tensor with {size} entries exceeds {MAX_ENTRIES}")

    den = _lcm([c.denominator for c in p.terms.values()]) if p.terms else 1
    arr = np.zeros(shape, dtype=object)
    arr[...] = 0
    for m, c in p.terms.items():
        arr[m] = c.numerator * (den // c.denominator)
    if p.arity == 0:
        return BernsteinTensor(arr, den)

    for axis, k in enumerate(ks):
        binoms = [math.comb(k, j) for j in range(k + 1)]
        scale = _lcm(binoms)
        arr *= _axis_weights(shape, axis, [scale // b for b in binoms])
        _pascal_pass(arr, axis)
        den *= scale
    return BernsteinTensor(arr, den).reduced()


def _box_interval(lo: Fraction, hi: Fraction) -> Interval:
    return Interval.enclose(lo, hi)


def range_enclosure(
    p: SparsePoly,
    box: Sequence[tuple],
    tolerance,
    budget: int = 10_000,
    stats: dict | None = None,
) -> Interval:
    """Interval containing the range of ``p`` over ``box``.

    Leaves are refined until the coefficient bounds are within ``tolerance``
    of the best exact corner values on both sides.  The leaf holding the
    worse side is split along its axis of largest coefficient spread.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    tol = Fraction(tolerance)
    q = p.affine_reparam(box) if p.arity else p
    root = to_bernstein(q)

    counter = 0
    leaves: dict[int, BernsteinTensor] = {0: root}
    hi_heap = [(-root.bound_max(), 0)]
    lo_heap = [(root.bound_min(), 0)]
    corners = root.corner_values()
    best_hi, best_lo = max(corners), min(corners)
    examined = 1

    def top(heap, sign):
        while heap and heap[0][1] not in leaves:
            heapq.heappop(heap)
        return sign * heap[0][0], heap[0][1]

    while True:
        ub, ub_id = top(hi_heap, -1)
        lb, lb_id = top(lo_heap, 1)
        gap_hi, gap_lo = ub - best_hi, best_lo - lb
        if gap_hi <= tol and gap_lo <= tol:
            break
        if examined + 2 > budget:
            if stats is not None:
                stats["boxes"] = examined
            raise BudgetExhausted(_box_interval(lb, ub), examined)
        target = ub_id if gap_hi >= gap_lo else lb_id
        t = leaves.pop(target)
        axis = max(range(t.arity), key=lambda a: (t.spread(a), -a))
        for half in t.subdivide(axis):
            half = half.reduced()
            counter += 1
            leaves[counter] = half
            heapq.heappush(hi_heap, (-half.bound_max(), counter))
            heapq.heappush(lo_heap, (half.bound_min(), counter))
            cv = half.corner_values()
            best_hi = max(best_hi, max(cv))
            best_lo = min(best_lo, min(cv))
            examined += 1
    if stats is not None:
        stats["boxes"] = examined
        stats["sample_hi"] = best_hi
        stats["sample_lo"] = best_lo
    return _box_interval(lb, ub)


def bernstein_verify(
    p: SparsePoly,
    box,
    bound,
    upper: bool = True,
    budget: int = 10_000,
):
    """Prove ``p <= bound`` (or ``>=`` when ``upper`` is false) on ``box``.

    The tensor of the whole box is tried first; undecided pieces are split at
    the midpoint of their largest-spread axis, depth first.  ``bound`` may be a
    rational or an :class:`Interval` (the unfavourable endpoint is used).
    Returns an :class:`~rigorkit.expr.VerifyReport`; a counterexample witness
    is a box vertex where the exact value violates the bound.
    """
    from .expr import Box, Verdict, VerifyReport

    if budget < 1:
        raise ValueError("budget must be at least 1")
    box = box if isinstance(box, Box) else Box(box)
    if isinstance(bound, Interval):
        safe = bound.lo_q if upper else bound.hi_q
        beyond = bound.hi_q if upper else bound.lo_q
    else:
        safe = beyond = Fraction(bound)
    if any(w == 0 for w in box.widths()):
        # freeze degenerate coordinates before reparametrizing
        fixed = [SparsePoly.var(p.arity, i) for i in range(p.arity)]
        for i, (lo, hi) in enumerate(box):
            if lo == hi:
                fixed[i] = SparsePoly.constant(p.arity, lo)
        p = p.compose(fixed)
        box = Box([(lo, hi) if lo < hi else (lo, lo + 1) for lo, hi in box])
    root = to_bernstein(p.affine_reparam(list(box)))

    stack = [(root, box, 0)]
    examined = 0
    max_depth = 0
    while stack:
        if examined >= budget:
            return VerifyReport(Verdict.BUDGET_EXHAUSTED, examined, max_depth)
        t, b, depth = stack.pop()
        examined += 1
        max_depth = max(max_depth, depth)
        if (t.bound_max() <= safe) if upper else (t.bound_min() >= safe):
            continue
        for corner in itertools.product((False, True), repeat=t.arity):
            v = t.corner(corner)
            if (v > beyond) if upper else (v < beyond):
                pt = [hi if c else lo for c, (lo, hi) in zip(corner, b)]
                return VerifyReport(
                    Verdict.COUNTEREXAMPLE, examined, max_depth, Box((x, x) for x in pt), {"value": str(v)}
                )
        axis = max(range(t.arity), key=lambda a: (t.spread(a), -a))
        left, right = t.subdivide(axis)
        bl, br = b.split(axis)
        stack.append((right.reduced(), br, depth + 1))
        stack.append((left.reduced(), bl, depth + 1))
    return VerifyReport(Verdict.PROVEN, examined, max_depth)
