"""Named inequalities: JSON documents, builders and the corpus runner."""

from __future__ import annotations

import enum
import fnmatch
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .bernstein import bernstein_verify
from .expr import (
    Arctan,
    Box,
    Const,
    Expr,
    Sqrt,
    Var,
    Verdict,
    VerifyReport,
    delta4_x,
    delta_x,
    from_poly,
    from_json,
    to_json,
    to_poly,
    verify_lower,
    verify_upper,
)
from .numeric import ConstantName, Interval, enclose_constant
from .poly import SparsePoly

SCHEMA = "rigorkit.inequality/1"
RELATIONS = ("<=", ">=", "<", ">")


class CorpusError(ValueError):
    """A corpus document failed to parse; ``source`` names the file."""

    def __init__(self, message: str, source: str = "<memory>", line: int | None = None):
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


class Method(str, enum.Enum):
    INTERVAL_BB = "IntervalBB"
    BERNSTEIN = "Bernstein"


class Provenance(str, enum.Enum):
    PAPER_STATED = "PaperStated"
    RECONSTRUCTED = "Reconstructed"


@dataclass
class NamedInequality:
    id: str
    expr: Expr
    box: Box
    relation: str
    bound: Fraction | ConstantName
    method: Method
    provenance: Provenance
    epsilon: Fraction = Fraction(0)
    assumptions: tuple[Expr, ...] = ()
    lets: tuple[tuple[str, Expr], ...] = ()
    budget: int = 20_000
    title: str = ""
    note: str = ""
    variables: tuple[str, ...] = ()

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}")
        if self.relation in ("<", ">") and self.epsilon <= 0:
            raise ValueError("strict relations need a positive epsilon")
        if self.method is Method.BERNSTEIN and self.assumptions:
            raise ValueError("the Bernstein method does not take assumptions")

    @property
    def upper(self) -> bool:
        return self.relation in ("<=", "<")

    def target(self, precision: int = 64) -> Interval | Fraction:
        """The bound actually proved: shifted by epsilon for strict relations."""
        shift = self.epsilon if self.relation in ("<", ">") else Fraction(0)
        if self.upper:
            shift = -shift
        if isinstance(self.bound, ConstantName):
            return enclose_constant(self.bound, precision) + Interval.enclose(shift, prec=precision)
        return self.bound + shift

    def verify(self, budget: int | None = None) -> VerifyReport:
        budget = self.budget if budget is None else budget
        bound = self.target()
        if self.method is Method.BERNSTEIN:
            poly = to_poly(self.expr, len(self.box))
            return bernstein_verify(poly, self.box, bound, self.upper, budget)
        fn = verify_upper if self.upper else verify_lower
        return fn(self.expr, self.box, bound, budget, assumptions=self.assumptions)

    # -- JSON --------------------------------------------------------------

    def to_json(self) -> dict:
        names = {id(e): n for n, e in self.lets}

        def enc(e: Expr, top: bool = False) -> dict:
            if not top and id(e) in names:
                return {"op": "ref", "name": names[id(e)]}
            d = to_json(e)
            return _rewrite_refs(e, d, names)

        doc = {
            "schema": SCHEMA,
            "id": self.id,
            "title": self.title,
            "provenance": self.provenance.value,
            "method": self.method.value,
            "variables": list(self.variables) or [f"x{i}" for i in range(len(self.box))],
            "box": self.box.to_json(),
            "relation": self.relation,
            "bound": {"name": self.bound.value} if isinstance(self.bound, ConstantName) else str(self.bound),
            "epsilon": str(self.epsilon),
            "budget": self.budget,
            "lets": [{"name": n, "expr": enc(e, True)} for n, e in self.lets],
            "assumptions": [enc(a) for a in self.assumptions],
            "expr": enc(self.expr),
            "note": self.note,
        }
        return doc

    @classmethod
    def from_json(cls, doc: dict, source: str = "<memory>") -> "NamedInequality":
        try:
            if doc.get("schema") != SCHEMA:
                raise CorpusError(f"unsupported schema {doc.get('schema')!r}", source)
            lets: dict[str, Expr] = {}
            let_list = []
            for item in doc.get("lets", []):
                e = from_json(item["expr"], lets)
                lets[item["name"]] = e
                let_list.append((item["name"], e))
            bound = doc["bound"]
            bound = ConstantName.parse(bound["name"]) if isinstance(bound, dict) else Fraction(bound)
            return cls(
                id=str(doc["id"]),
                expr=from_json(doc["expr"], lets),
                box=Box(tuple(Fraction(v) for v in b) for b in doc["box"]),
                relation=doc["relation"],
                bound=bound,
                method=Method(doc["method"]),
                provenance=Provenance(doc["provenance"]),
                epsilon=Fraction(doc.get("epsilon", "0")),
                assumptions=tuple(from_json(a, lets) for a in doc.get("assumptions", [])),
                lets=tuple(let_list),
                budget=int(doc.get("budget", 20_000)),
                title=doc.get("title", ""),
                note=doc.get("note", ""),
                variables=tuple(doc.get("variables", ())),
            )
        except CorpusError:
            raise
        except (KeyError, ValueError, TypeError) as err:
            raise CorpusError(f"{type(err).__name__}: {err}", source) from None

    def dumps(self) -> str:
        # one key per line; expressions stay on a single compact line
        d = self.to_json()
        lines = [f" {json.dumps(k)}: {json.dumps(v, separators=(',', ':'))}" for k, v in d.items()]
        return "{\n" + ",\n".join(lines) + "\n}\n"


def _rewrite_refs(e: Expr, d: dict, names: dict) -> dict:
    # walk the expression and its JSON image in lockstep, replacing named subtrees
    if "args" in d:
        d["args"] = [
            {"op": "ref", "name": names[id(c)]} if id(c) in names else _rewrite_refs(c, cd, names)
            for c, cd in zip(e.children(), d["args"])
        ]
    elif "arg" in d:
        c = e.children()[0]
        d["arg"] = {"op": "ref", "name": names[id(c)]} if id(c) in names else _rewrite_refs(c, d["arg"], names)
    return d


# -- loading -------------------------------------------------------------------


def corpus_dir() -> Path:
    return Path(str(resources.files("rigorkit") / "data" / "corpus"))


def load_file(path: Path | str) -> NamedInequality:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise CorpusError(err.msg, str(path), err.lineno) from None
    return NamedInequality.from_json(doc, str(path))


def load_corpus(directory: Path | str | None = None) -> list[NamedInequality]:
    directory = corpus_dir() if directory is None else Path(directory)
    entries = [load_file(p) for p in sorted(directory.glob("*.json"))]
    return sorted(entries, key=lambda e: e.id)


# -- running -------------------------------------------------------------------


@dataclass
class CorpusRow:
    id: str
    provenance: Provenance
    method: Method
    verdict: Verdict
    boxes: int
    seconds: float
    warning: str = ""

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "provenance": self.provenance.value,
            "method": self.method.value,
            "verdict": self.verdict.value,
            "boxes": self.boxes,
            "seconds": round(self.seconds, 3),
            "warning": self.warning,
        }


@dataclass
class CorpusReport:
    rows: list[CorpusRow] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """True iff every PaperStated entry was proven."""
        return all(r.verdict is Verdict.PROVEN for r in self.rows if r.provenance is Provenance.PAPER_STATED)

    def table(self) -> str:
        lines = [f"{'id':<34} {'provenance':<13} {'method':<10} {'verdict':<17} {'boxes':>7}"]
        for r in self.rows:
            line = f"{r.id:<34} {r.provenance.value:<13} {r.method.value:<10} {r.verdict.value:<17} {r.boxes:>7}"
            if r.warning:
                line += f"  ({r.warning})"
            lines.append(line)
        return "\n".join(lines)


def _run_one(entry: NamedInequality, budget: int | None) -> tuple[VerifyReport, float]:
    start = time.perf_counter()
    result = entry.verify(budget)
    return result, time.perf_counter() - start


def run_corpus(
    pattern: str = "*",
    budget: int | None = None,
    entries: Iterable[NamedInequality] | None = None,
    jobs: int = 1,
) -> CorpusReport:
    """Verify every entry whose id matches the glob ``pattern``, ordered by id.

    ``budget`` overrides each entry's own budget.  With ``jobs > 1`` entries
    run in worker processes; the report order does not depend on scheduling.
    """
    entries = load_corpus() if entries is None else list(entries)
    chosen = [e for e in sorted(entries, key=lambda e: e.id) if fnmatch.fnmatchcase(e.id, pattern)]
    if jobs > 1 and len(chosen) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, chosen, [budget] * len(chosen)))
    else:
        results = [_run_one(e, budget) for e in chosen]
    report = CorpusReport()
    for entry, (result, elapsed) in zip(chosen, results):
        warning = ""
        if entry.provenance is Provenance.RECONSTRUCTED and not result.proven:
            warning = "reconstructed domain; not a corpus failure"
            if result.witness is not None:
                warning += f"; witness {result.witness}"
        report.rows.append(
            CorpusRow(entry.id, entry.provenance, entry.method, result.verdict, result.boxes_examined, elapsed, warning)
        )
    return report


# -- builders ------------------------------------------------------------------


def _kepler_entry() -> NamedInequality:
    from .kepler import KEPLER_BOX, p_expr

    return NamedInequality(
        id="586468779",
        title="gamma <= pt on [2, 2.51]^6, certified through p = sqrt2 (g - pt) <= 0",
        expr=p_expr(),
        box=KEPLER_BOX,
        relation="<=",
        bound=Fraction(0),
        method=Method.BERNSTEIN,
        provenance=Provenance.PAPER_STATED,
        budget=1,
        note=(
            "p is the rational polynomial obtained from the surrogate g; together with the "
            "validated approximations, p <= 0 gives gamma <= g <= pt. Equality holds at the corner."
        ),
        variables=tuple(f"y{i}" for i in range(1, 7)),
    )


_LEN = Fraction(251, 100)  # |u - v|, pushed to its maximum
_R = Fraction(6, 5)  # excluded radius around each vertex
_DIAM_SQ = Fraction(1044, 1000) ** 2
_DIAM_EPS = Fraction(1, 10_000)


def _diam_points(y: Expr, low_case: bool, s: Expr | None = None) -> dict[str, tuple[Expr, Expr]]:
    ux = (_LEN**2 - y * y + 4) / 4
    uy = Sqrt(_LEN**2 - ux * ux)
    k = _R / _LEN
    pts = {
        "A": (k * ux, k * uy),
        "B": ((1 - k) * ux, (1 - k) * uy),
        "E": (Const(1), Sqrt(Const(Fraction(11, 25)))),
    }
    if low_case:
        # circle intersection of radius 1.2 around u and w, on the side facing v
        h = Sqrt(s * (Fraction(24, 5) - s)) / 2
        pts["Q"] = ((ux + 2) / 2 - h * uy / y, uy / 2 + h * (ux - 2) / y)
    else:
        r = _R / y
        pts["C"] = (ux + r * (2 - ux), uy - r * uy)
        pts["D"] = (2 + r * (ux - 2), r * uy)
    return pts


def _diam_entries() -> list[NamedInequality]:
    out = []
    for low_case in (True, False):
        if low_case:
            s = Var(0)
            y = Fraction(12, 5) - s
            box = Box([(0, Fraction(2, 5))])
            var = ("s",)
            case = "lo"
            desc = "|u-w| = 2.4 - s, s in [0, 0.4]"
        else:
            s = None
            y = Var(0)
            box = Box([(Fraction(12, 5), _LEN)])
            var = ("y",)
            case = "hi"
            desc = "|u-w| = y in [2.4, 2.51]"
        pts = _diam_points(y, low_case, s)
        names = sorted(pts)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                (ax, ay), (bx, by) = pts[a], pts[b]
                dist2 = (ax - bx) ** 2 + (ay - by) ** 2
                out.append(
                    NamedInequality(
                        id=f"diam-{case}-{a}{b}",
                        title=f"squared distance between boundary vertices {a}, {b} of X is below 1.044^2",
                        expr=dist2,
                        box=box,
                        relation="<",
                        bound=_DIAM_SQ,
                        epsilon=_DIAM_EPS,
                        method=Method.INTERVAL_BB,
                        provenance=Provenance.PAPER_STATED,
                        budget=20_000,
                        note=(
                            "Triangle v=(0,0), w=(2,0), |u-v| = 2.51, " + desc + ". X = points of the triangle "
                            "at distance >= 1.2 from every vertex; A, B lie on uv, C, D on uw, E and Q are "
                            "circle intersections. The diameter of X is attained at these vertices."
                        ),
                        variables=var,
                    )
                )
    return out


def _dihedral_entry(
    ident: str,
    ranges: Sequence[tuple],
    relation: str,
    bound: Fraction,
    note: str,
    budget: int = 60_000,
) -> NamedInequality:
    box = Box(ranges)
    origin = [lo for lo, _ in box]
    ys = [SparsePoly.var(6, i) for i in range(6)]
    xs = [y * y for y in ys]
    # polynomial parts expanded about the lower corner of the box
    d = from_poly(delta_x(xs), origin)
    d4 = from_poly(delta4_x(xs), origin)
    ang = Const(ConstantName.PI) / 2 + Arctan(-d4 / Sqrt(4 * from_poly(xs[0], origin) * d))
    return NamedInequality(
        id=ident,
        title=f"dihedral angle along edge 1 {relation} {bound}",
        expr=ang,
        box=box,
        relation=relation,
        bound=bound,
        epsilon=Fraction(1, 10**6) if relation in ("<", ">") else Fraction(0),
        method=Method.INTERVAL_BB,
        provenance=Provenance.RECONSTRUCTED,
        assumptions=(d,),
        lets=(("delta", d), ("delta4", d4)),
        budget=budget,
        note=note + " Delta and its x4-derivative are expanded about the lower box corner. Edge order: |0u2|, |0wi|, |0wj|, |wi wj|, |u2 wj|, |u2 wi|; Delta > 0 assumed.",
        variables=tuple(f"y{i}" for i in range(1, 7)),
    )


def _dihedral_entries() -> list[NamedInequality]:
    q = Fraction
    n, big = (2, q(251, 100)), (q(291, 100), q(16, 5))
    cap = (2, q(251, 100))
    s223 = (2, q(223, 100))
    sp = (q(16, 5), q(16, 5))
    mono = " Larger |wi wj| only increases the angle, so the range of that edge is capped."
    return [
        _dihedral_entry(
            "dih-three-edge-d23",
            [n, n, n, cap, big, big],
            ">=",
            q(7, 10),
            "Three crossing edges: w2=u1, w3=u1'; crossing edges are longer than 2.91." + mono,
        ),
        _dihedral_entry(
            "dih-three-edge-d34",
            [n, n, n, cap, big, big],
            ">=",
            q(7, 10),
            "Three crossing edges: w3=u1', w4=u1''; same edge data as d23 by symmetry." + mono,
        ),
        _dihedral_entry(
            "dih-three-edge-d15",
            [n, n, n, (2, 2), n, n],
            "<",
            q(7, 5),
            "Three crossing edges: w1=w, w5=v with |v-w| = 2 and v, w pivoted to within 2.51 of u2.",
        ),
        _dihedral_entry(
            "dih-double-cross-d14",
            [s223, n, n, (2, 2), n, n],
            "<",
            q(13, 10),
            "Two crossing edges: w1=v, w4=w with |v-w| = 2, |u2| <= 2.23.",
        ),
        _dihedral_entry(
            "dih-double-cross-d12a",
            [s223, n, s223, cap, sp, (q(251, 100), q(251, 100))],
            ">",
            q(1, 2),
            "Two crossing edges: w1=v, w2=u1'; branch where v was pivoted to |u2-v| = 2.51." + mono,
        ),
        _dihedral_entry(
            "dih-double-cross-d12b",
            [s223, n, s223, (q(251, 100), q(251, 100)), sp, n],
            ">",
            q(1, 2),
            "Two crossing edges: w1=v, w2=u1'; branch |v-u1'| >= 2.51 (minimum at 2.51)." + mono,
        ),
        _dihedral_entry(
            "dih-double-cross-d23",
            [s223, s223, n, cap, sp, sp],
            ">",
            q(4, 5),
            "Two crossing edges: w2=u1', w3=u1, both stretched to 3.2 from u2." + mono,
        ),
        _dihedral_entry(
            "dih-double-cross-d34",
            [s223, n, n, (q(11, 5), q(251, 100)), n, (q(16, 5), q(16, 5))],
            ">",
            q(0),
            "Two crossing edges: w3=u1, w4=w; positivity holds for any nondegenerate simplex, "
            "the lower end of |u1 w| is raised to keep Delta certifiably positive.",
        ),
    ]


def builtin_entries() -> list[NamedInequality]:
    return sorted([_kepler_entry(), *_diam_entries(), *_dihedral_entries()], key=lambda e: e.id)


def write_corpus(directory: Path | str | None = None) -> list[Path]:
    """Regenerate the JSON corpus files from the builders."""
    directory = corpus_dir() if directory is None else Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for entry in builtin_entries():
        path = directory / f"{entry.id}.json"
        path.write_text(entry.dumps())
        paths.append(path)
    return paths
