"""Interval linear systems A x <= b and rigorous checking of Farkas certificates."""

from __future__ import annotations

import enum
import os
import re
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .numeric import ConstantName, Interval, enclose_constant

CLAMP = Fraction(1, 2**20)  # solver noise tolerated on multipliers
DENOMINATOR_BOUND = 2**20
SOLVER_ENV = "RIGORKIT_LP_SOLVER"


class ParseError(ValueError):
    def __init__(self, message: str, source: str = "<memory>", line: int | None = None):
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


class MissingBounds(ValueError):
    pass


class BridgeError(RuntimeError):
    pass


# -- constraint files ------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_.]*"
_REL = re.compile(r"(<=|>=|=)")
_CONSTANTS = {c.value.lower(): c for c in ConstantName} | {"pi": ConstantName.PI, "sqrt2": ConstantName.SQRT2}


@dataclass(frozen=True)
class Term:
    coeff: Fraction
    constants: tuple[ConstantName, ...]
    var: str | None


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[Term, ...]  # all moved to the left side
    relation: str  # "<=", ">=" or "="


@dataclass
class ConstraintFile:
    """A textual conjunction of linear constraints plus variable bounds."""

    constraints: list[Constraint]
    bounds: dict[str, tuple[Fraction | None, Fraction | None]]
    variables: list[str]

    @classmethod
    def loads(cls, text: str, source: str = "<memory>") -> "ConstraintFile":
        constraints: list[Constraint] = []
        bounds: dict[str, tuple[Fraction | None, Fraction | None]] = {}
        variables: list[str] = []

        def note(var):
            if var is not None and var not in variables:
                variables.append(var)

        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name = None
            m = re.match(rf"^({_NAME})\s*:\s*(.*)$", line)
            if m:
                name, line = m.group(1), m.group(2)
            pieces = _REL.split(line)
            try:
                if len(pieces) == 5:
                    lo_t, r1, mid_t, r2, hi_t = (p.strip() for p in pieces)
                    if r1 != "<=" or r2 != "<=":
                        raise ValueError("bound declarations read: lo <= x <= hi")
                    lo = _rational_side(lo_t)
                    hi = _rational_side(hi_t)
                    var = mid_t.strip()
                    if not re.fullmatch(_NAME, var) or var.lower() in _CONSTANTS:
                        raise ValueError(f"bound declaration needs a variable, got {var!r}")
                    old = bounds.get(var, (None, None))
                    lo = lo if old[0] is None else max(lo, old[0])
                    hi = hi if old[1] is None else min(hi, old[1])
                    bounds[var] = (lo, hi)
                    note(var)
                    continue
                if len(pieces) != 3:
                    raise ValueError("expected one relation among <=, >=, =")
                lhs, rel, rhs = (p.strip() for p in pieces)
                terms = _parse_side(lhs) + [Term(-t.coeff, t.constants, t.var) for t in _parse_side(rhs)]
            except ValueError as err:
                raise ParseError(str(err), source, lineno) from None
            for t in terms:
                note(t.var)
            constraints.append(Constraint(name or f"r{len(constraints) + 1}", tuple(terms), rel))
        names = [c.name for c in constraints]
        if len(set(names)) != len(names):
            raise ParseError("duplicate constraint names", source)
        return cls(constraints, bounds, variables)

    @classmethod
    def load(cls, path: Path | str) -> "ConstraintFile":
        path = Path(path)
        return cls.loads(path.read_text(), str(path))


_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?(?:[eE][-+]?\d+)?(?:/\d+)?|\.\d+(?:[eE][-+]?\d+)?)|(" + _NAME + r")|([-+*]))")


def _tokens(text: str) -> list[tuple[str, str]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot read {text[pos:].strip()!r}")
        num, name, op = m.groups()
        out.append(("num", num) if num else ("name", name) if name else ("op", op))
        pos = m.end()
    return out


def _parse_side(text: str) -> list[Term]:
    toks = _tokens(text)
    if not toks:
        raise ValueError("empty side of a constraint")
    terms = []
    i = 0
    while i < len(toks):
        sign = 1
        while i < len(toks) and toks[i] in (("op", "+"), ("op", "-")):
            sign = -sign if toks[i][1] == "-" else sign
            i += 1
        factors = []
        while i < len(toks):
            kind, val = toks[i]
            if kind == "op":
                raise ValueError(f"unexpected {val!r}")
            factors.append((kind, val))
            i += 1
            if i < len(toks) and toks[i] == ("op", "*"):
                i += 1
                continue
            if i < len(toks) and toks[i][0] != "op":
                continue  # juxtaposition, as in "2 x1"
            break
        if not factors:
            raise ValueError("dangling sign")
        terms.append(_make_term(factors, sign))
    return terms


def _make_term(factors, sign: int) -> Term:
    coeff = Fraction(sign)
    consts: list[ConstantName] = []
    var = None
    for kind, val in factors:
        if kind == "num":
            coeff *= Fraction(val)
        elif val.lower() in _CONSTANTS:
            consts.append(_CONSTANTS[val.lower()])
        else:
            if var is not None:
                raise ValueError(f"nonlinear term {var}*{val}")
            var = val
    return Term(coeff, tuple(consts), var)


def _rational_side(text: str) -> Fraction:
    terms = _parse_side(text)
    if any(t.var is not None or t.constants for t in terms):
        raise ValueError("bounds must be rational numbers")
    return sum((t.coeff for t in terms), Fraction(0))


# -- interval systems ------------------------------------------------------------


@dataclass(frozen=True)
class IntervalLinearSystem:
    """``A x <= b`` for all ``A_lo <= A <= A_hi``, ``b <= b_hi``, ``x_lo <= x <= x_hi``."""

    variables: tuple[str, ...]
    rows: tuple[str, ...]
    A_lo: tuple[tuple[Fraction, ...], ...]
    A_hi: tuple[tuple[Fraction, ...], ...]
    b_hi: tuple[Fraction, ...]
    x_lo: tuple[Fraction, ...]
    x_hi: tuple[Fraction, ...]

    def __post_init__(self):
        m, n = len(self.rows), len(self.variables)
        if len(self.A_lo) != m or len(self.A_hi) != m or len(self.b_hi) != m:
            raise ValueError("row count mismatch")
        if len(self.x_lo) != n or len(self.x_hi) != n:
            raise ValueError("variable count mismatch")
        for lo_row, hi_row in zip(self.A_lo, self.A_hi):
            if len(lo_row) != n or len(hi_row) != n:
                raise ValueError("column count mismatch")
            if any(a > b for a, b in zip(lo_row, hi_row)):
                raise ValueError("A_lo must not exceed A_hi")
        if any(a > b for a, b in zip(self.x_lo, self.x_hi)):
            raise ValueError("x_lo must not exceed x_hi")

    @classmethod
    def exact(cls, A, b, x_lo, x_hi, variables=None, rows=None) -> "IntervalLinearSystem":
        """A point system from rational data."""
        A = tuple(tuple(Fraction(v) for v in row) for row in A)
        n = len(x_lo)
        return cls(
            tuple(variables or (f"x{j + 1}" for j in range(n))),
            tuple(rows or (f"r{i + 1}" for i in range(len(A)))),
            A,
            A,
            tuple(Fraction(v) for v in b),
            tuple(Fraction(v) for v in x_lo),
            tuple(Fraction(v) for v in x_hi),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.variables)

    def to_json(self) -> dict:
        s = lambda row: [str(v) for v in row]  # noqa: E731
        return {
            "variables": list(self.variables),
            "rows": list(self.rows),
            "A_lo": [s(r) for r in self.A_lo],
            "A_hi": [s(r) for r in self.A_hi],
            "b_hi": s(self.b_hi),
            "x_lo": s(self.x_lo),
            "x_hi": s(self.x_hi),
        }


def normalize(c: ConstraintFile, precision: int = 64) -> IntervalLinearSystem:
    """Bring every constraint into ``row . x <= rhs`` with interval coefficients.

    ``>=`` rows are negated; an equality becomes ``name_le`` and ``name_ge``.
    Constant names are enclosed at ``precision`` bits.
    """
    variables = list(c.variables)
    col = {v: j for j, v in enumerate(variables)}
    missing = [v for v in variables if None in c.bounds.get(v, (None, None))]
    if missing:
        raise MissingBounds(f"no bounds for {', '.join(missing)}")
    rows, lo_rows, hi_rows, b_hi = [], [], [], []
    for con in c.constraints:
        coeffs = [Interval(0)] * len(variables)
        const = Interval(0)
        for t in con.terms:
            iv = Interval(t.coeff)
            for k in t.constants:
                iv = iv * enclose_constant(k, precision)
            if t.var is None:
                const = const + iv
            else:
                coeffs[col[t.var]] = coeffs[col[t.var]] + iv
        # terms on the left; constant moves right: coeffs . x <= -const
        signs = {"<=": [(1, "")], ">=": [(-1, "")], "=": [(1, "_le"), (-1, "_ge")]}[con.relation]
        for sgn, suffix in signs:
            row = [iv if sgn > 0 else -iv for iv in coeffs]
            rhs = -const if sgn > 0 else const
            rows.append(con.name + suffix)
            lo_rows.append(tuple(iv.lo_q for iv in row))
            hi_rows.append(tuple(iv.hi_q for iv in row))
            b_hi.append(rhs.hi_q)
    return IntervalLinearSystem(
        tuple(variables),
        tuple(rows),
        tuple(lo_rows),
        tuple(hi_rows),
        tuple(b_hi),
        tuple(c.bounds[v][0] for v in variables),
        tuple(c.bounds[v][1] for v in variables),
    )


# -- certificates ----------------------------------------------------------------


@dataclass(frozen=True)
class FarkasCertificate:
    y: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(Fraction(v) for v in self.y))
        if any(v < 0 for v in self.y):
            raise ValueError("Farkas multipliers must be non-negative")


class Verdict(str, enum.Enum):
    REFUTED = "Refuted"
    NOT_REFUTED = "NotRefuted"


@dataclass(frozen=True)
class CheckResult:
    verdict: Verdict
    reason: str = ""
    lhs_lo: Fraction | None = None
    rhs_hi: Fraction | None = None

    @property
    def refuted(self) -> bool:
        return self.verdict is Verdict.REFUTED

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "reason": self.reason,
            "lhs_lo": None if self.lhs_lo is None else str(self.lhs_lo),
            "rhs_hi": None if self.rhs_hi is None else str(self.rhs_hi),
        }


def check_certificate(s: IntervalLinearSystem, cert: FarkasCertificate | Sequence) -> CheckResult:
    """Refuted iff the least value of ``(y^T A) x`` over all admissible ``A`` and ``x``
    exceeds ``y^T b_hi``; every feasible point would satisfy the opposite.

    All arithmetic is exact rational, so the verdict does not depend on where
    ``y`` came from.
    """
    if not isinstance(cert, FarkasCertificate):
        cert = FarkasCertificate(tuple(cert))
    m, n = s.shape
    if len(cert.y) != m:
        raise ValueError(f"certificate has {len(cert.y)} multipliers for {m} rows")
    y = cert.y
    lhs = Fraction(0)
    for j in range(n):
        c_lo = sum((y[i] * s.A_lo[i][j] for i in range(m) if y[i]), Fraction(0))
        c_hi = sum((y[i] * s.A_hi[i][j] for i in range(m) if y[i]), Fraction(0))
        lhs += min(c_lo * s.x_lo[j], c_lo * s.x_hi[j], c_hi * s.x_lo[j], c_hi * s.x_hi[j])
    rhs = sum((y[i] * s.b_hi[i] for i in range(m) if y[i]), Fraction(0))
    if lhs > rhs:
        return CheckResult(Verdict.REFUTED, "", lhs, rhs)
    return CheckResult(Verdict.NOT_REFUTED, "combined row is satisfiable within the bounds", lhs, rhs)


# -- solver bridge ---------------------------------------------------------------


def _lp_name(name: str, prefix: str) -> str:
    return name if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", name) and len(name) <= 255 else prefix


def _num(q: Fraction) -> str:
    return repr(float(q))


def emit_lp(s: IntervalLinearSystem) -> str:
    """CPLEX LP text of the midpoint system with a zero objective."""
    m, n = s.shape
    names = [_lp_name(v, f"x{j + 1}") for j, v in enumerate(s.variables)]
    rows = [_lp_name(r, f"r{i + 1}") for i, r in enumerate(s.rows)]
    if len(set(names)) != n:
        names = [f"x{j + 1}" for j in range(n)]
    if len(set(rows)) != m:
        rows = [f"r{i + 1}" for i in range(m)]
    lines = ["\\ rigorkit midpoint relaxation, zero objective", "Minimize", " obj: 0 " + names[0] if n else " obj: 0"]
    lines.append("Subject To")
    for i in range(m):
        terms = []
        for j in range(n):
            mid = (s.A_lo[i][j] + s.A_hi[i][j]) / 2
            if mid:
                terms.append(("- " if mid < 0 else "+ ") + _num(abs(mid)) + " " + names[j])
        body = " ".join(terms) if terms else "0 " + names[0]
        if body.startswith("+ "):
            body = body[2:]
        lines.append(f" {rows[i]}: {body} <= {_num(s.b_hi[i])}")
    lines.append("Bounds")
    for j in range(n):
        lines.append(f" {_num(s.x_lo[j])} <= {names[j]} <= {_num(s.x_hi[j])}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _rationalize(v: float) -> Fraction:
    q = Fraction(v).limit_denominator(DENOMINATOR_BOUND)
    if q < 0:
        if -q > CLAMP:
            raise BridgeError(f"negative multiplier {v}")
        return Fraction(0)
    return q


def parse_certificate(text: str, s: IntervalLinearSystem | None = None) -> FarkasCertificate:
    """Read dual multipliers from solver output.

    Accepts a bare vector such as ``(1.0, 1.0)`` or lines ``y <row> <value>``
    (as printed by ``python -m rigorkit.lpsolve``).  Tiny negatives clamp to 0.
    """
    stripped = text.strip()
    try:
        if stripped[:1] in "([":
            inner = stripped.strip("()[] \n")
            values = [float(tok) for tok in re.split(r"[,\s]+", inner) if tok]
            y = [_rationalize(v) for v in values]
        else:
            found: dict[str, float] = {}
            order: list[str] = []
            for line in stripped.splitlines():
                parts = line.split()
                if len(parts) == 3 and parts[0] == "y":
                    found[parts[1]] = float(parts[2])
                    order.append(parts[1])
            if not found:
                raise BridgeError("no multipliers in solver output")
            if s is None:
                y = [_rationalize(found[r]) for r in order]
            else:
                rows = [_lp_name(r, f"r{i + 1}") for i, r in enumerate(s.rows)]
                if len(set(rows)) != len(rows):
                    rows = [f"r{i + 1}" for i in range(len(rows))]
                y = [_rationalize(found.get(r, 0.0)) for r in rows]
    except ValueError as err:
        raise BridgeError(f"malformed solver output: {err}") from None
    if s is not None and len(y) != len(s.rows):
        raise BridgeError(f"solver returned {len(y)} multipliers for {len(s.rows)} rows")
    return FarkasCertificate(tuple(y))


def solver_command(solver: str | None = None) -> list[str]:
    solver = solver or os.environ.get(SOLVER_ENV)
    if solver:
        return shlex.split(solver)
    return [sys.executable, "-m", "rigorkit.lpsolve"]


def solve_external(s: IntervalLinearSystem, solver: str | None = None, timeout: float = 60) -> FarkasCertificate:
    """Write the LP, run the solver process on it and parse its multipliers."""
    cmd = solver_command(solver)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "system.lp"
        path.write_text(emit_lp(s))
        try:
            proc = subprocess.run(cmd + [str(path)], capture_output=True, text=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as err:
            raise BridgeError(f"solver failed to run: {err}") from None
    if proc.returncode not in (0, 1):
        raise BridgeError(f"solver exited with {proc.returncode}: {proc.stderr.strip()[:200]}")
    return parse_certificate(proc.stdout, s)


def refute(s: IntervalLinearSystem, solver: str | None = None, timeout: float = 60) -> CheckResult:
    """The full pipeline: untrusted solve, then the rigorous check."""
    try:
        cert = solve_external(s, solver, timeout)
    except BridgeError as err:
        return CheckResult(Verdict.NOT_REFUTED, str(err))
    return check_certificate(s, cert)
