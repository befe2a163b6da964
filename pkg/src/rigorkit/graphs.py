"""Plane graphs as face lists, hypermaps, enumeration from seed graphs, isomorphism."""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

Face = tuple[tuple[int, ...], bool]


class MalformedGraph(ValueError):
    pass


class FinalGraph(ValueError):
    """next_plane was asked to extend a graph without non-final faces."""


class ArchiveParseError(ValueError):
    def __init__(self, message: str, source: str = "<memory>", line: int | None = None):
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


# -- hypermaps -------------------------------------------------------------------


def _cycles(perm: Sequence[int]) -> list[list[int]]:
    seen = [False] * len(perm)
    out = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cyc = []
        d = start
        while not seen[d]:
            seen[d] = True
            cyc.append(d)
            d = perm[d]
        out.append(cyc)
    return out


@dataclass(frozen=True)
class Hypermap:
    """Three permutations of ``range(darts)`` with ``e(n(f(d))) == d``."""

    e: tuple[int, ...]
    n: tuple[int, ...]
    f: tuple[int, ...]

    def __post_init__(self):
        k = len(self.e)
        for name in ("e", "n", "f"):
            perm = getattr(self, name)
            if len(perm) != k or sorted(perm) != list(range(k)):
                raise MalformedGraph(f"{name} is not a permutation of {k} darts")

    @classmethod
    def from_e_f(cls, e: Sequence[int], f: Sequence[int]) -> "Hypermap":
        """Complete ``n`` from ``e`` and ``f`` so the composition is the identity."""
        finv = [0] * len(f)
        for d, fd in enumerate(f):
            finv[fd] = d
        n = tuple(e[finv[d]] for d in range(len(f)))
        return cls(tuple(e), n, tuple(f))

    @property
    def darts(self) -> int:
        return len(self.e)

    def composition_is_identity(self) -> bool:
        return all(self.e[self.n[self.f[d]]] == d for d in range(self.darts))

    def e_is_fixed_point_free_involution(self) -> bool:
        return all(self.e[d] != d and self.e[self.e[d]] == d for d in range(self.darts))

    def node_cycles(self) -> list[list[int]]:
        return _cycles(self.n)

    def edge_cycles(self) -> list[list[int]]:
        return _cycles(self.e)

    def face_cycles(self) -> list[list[int]]:
        return _cycles(self.f)

    def is_connected(self) -> bool:
        if not self.darts:
            return True
        seen = {0}
        todo = [0]
        while todo:
            d = todo.pop()
            for x in (self.e[d], self.n[d], self.f[d]):
                if x not in seen:
                    seen.add(x)
                    todo.append(x)
        return len(seen) == self.darts


def euler_characteristic(h: Hypermap) -> int:
    """Node cycles minus edge cycles plus face cycles; 2 for connected planar maps."""
    return len(h.node_cycles()) - len(h.edge_cycles()) + len(h.face_cycles())


# -- plane graphs ----------------------------------------------------------------


def _rotate_min(vs: Sequence[int]) -> tuple[int, ...]:
    i = min(range(len(vs)), key=lambda k: vs[k])
    return tuple(vs[i:]) + tuple(vs[:i])


@dataclass(frozen=True)
class PlaneGraph:
    """Faces as vertex cycles with a final flag.

    Each directed edge ``(u, v)`` lies on exactly one face and so does its
    reverse.  Vertices are ``0 .. V-1``.
    """

    faces: tuple[Face, ...]

    def __init__(self, faces: Iterable):
        fs = []
        for item in faces:
            if isinstance(item, tuple) and len(item) == 2 and isinstance(item[1], bool):
                vs, final = item
            else:
                vs, final = item, True
            fs.append((tuple(int(v) for v in vs), bool(final)))
        object.__setattr__(self, "faces", tuple(fs))
        self._check()

    def _check(self) -> None:
        seen: dict[tuple[int, int], int] = {}
        verts: set[int] = set()
        for i, (vs, _) in enumerate(self.faces):
            if len(vs) < 3:
                raise MalformedGraph(f"face {i} has fewer than three vertices")
            if len(set(vs)) != len(vs):
                raise MalformedGraph(f"face {i} repeats a vertex")
            verts.update(vs)
            for a, b in zip(vs, vs[1:] + vs[:1]):
                if (a, b) in seen:
                    raise MalformedGraph(f"directed edge {a}->{b} on faces {seen[(a, b)]} and {i}")
                seen[(a, b)] = i
        for a, b in seen:
            if (b, a) not in seen:
                raise MalformedGraph(f"edge {a}->{b} has no reverse")
        if verts != set(range(len(verts))):
            raise MalformedGraph("vertex ids are not dense from 0")

    @property
    def vertex_count(self) -> int:
        return 1 + max((max(vs) for vs, _ in self.faces), default=-1)

    @property
    def edge_count(self) -> int:
        return sum(len(vs) for vs, _ in self.faces) // 2

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @property
    def is_final(self) -> bool:
        return all(final for _, final in self.faces)

    def face_sizes(self) -> list[int]:
        return [len(vs) for vs, _ in self.faces]

    def edges(self) -> set[frozenset]:
        return {frozenset((a, b)) for vs, _ in self.faces for a, b in zip(vs, vs[1:] + vs[:1])}

    def nonfinal_faces(self) -> list[int]:
        return [i for i, (_, final) in enumerate(self.faces) if not final]

    def reversed(self) -> "PlaneGraph":
        """Mirror image: every face traversed backwards."""
        return PlaneGraph((tuple(reversed(vs)), final) for vs, final in self.faces)

    def finalized(self) -> "PlaneGraph":
        return PlaneGraph((vs, True) for vs, _ in self.faces)

    def normalized(self) -> "PlaneGraph":
        """Faces rotated to start at their least vertex and sorted; same graph."""
        return PlaneGraph(sorted((_rotate_min(vs), final) for vs, final in self.faces))

    def to_json(self) -> dict:
        return {"faces": [list(vs) for vs, _ in self.faces], "final": [final for _, final in self.faces]}

    @classmethod
    def from_json(cls, doc: dict) -> "PlaneGraph":
        finals = doc.get("final") or [True] * len(doc["faces"])
        return cls((tuple(vs), bool(fl)) for vs, fl in zip(doc["faces"], finals))

    def __repr__(self):
        body = " ".join(("" if final else "~") + ",".join(map(str, vs)) for vs, final in self.faces)
        return f"PlaneGraph({body})"


def hypermap_of(g: PlaneGraph) -> tuple[Hypermap, list[tuple[int, int]]]:
    """Darts are the directed face edges, numbered in face order.

    Returns the hypermap and the list mapping dart ids to ``(tail, head)``.
    ``f`` follows each face, ``e`` reverses a dart, ``n`` turns around the tail.
    """
    darts: list[tuple[int, int]] = []
    f: list[int] = []
    for vs, _ in g.faces:
        base = len(darts)
        k = len(vs)
        for i in range(k):
            darts.append((vs[i], vs[(i + 1) % k]))
            f.append(base + (i + 1) % k)
    index = {d: i for i, d in enumerate(darts)}
    try:
        e = [index[(b, a)] for a, b in darts]
    except KeyError as err:
        raise MalformedGraph(f"dart {err.args[0]} has no opposite") from None
    return Hypermap.from_e_f(e, f), darts


# -- seeds and successors --------------------------------------------------------


def seed(p: int) -> PlaneGraph:
    """Seed_p: a final outer (p+3)-gon and the reversed non-final inner one."""
    _check_p(p)
    k = p + 3
    outer = tuple(range(k))
    return PlaneGraph([(outer, True), (tuple(reversed(outer)), False)])


def _check_p(p: int) -> None:
    if not 0 <= p <= 5:
        raise ValueError("p must be in 0..5")


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    # all tuples of `parts` non-negative ints summing to `total`, lexicographic
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def selected_face(g: PlaneGraph) -> int:
    """The face next_plane subdivides: the first non-final face of least length."""
    open_faces = g.nonfinal_faces()
    if not open_faces:
        raise FinalGraph("graph has no non-final face")
    return min(open_faces, key=lambda i: (len(g.faces[i][0]), i))


def next_plane(g: PlaneGraph, p: int) -> list[PlaneGraph]:
    """Every way to cut one final face of size <= p+3 out of the selected face.

    Let the selected face be ``f0 .. f(m-1)`` rotated so ``f0`` is its least
    vertex.  The new final face keeps the edge ``f(m-1) -> f0`` and visits a
    subsequence ``0 = i0 < i1 < ... < ir = m-1`` of face positions; between
    consecutive chosen vertices it either reuses the face edge (adjacent
    positions) or runs along a fresh path of new vertices.  Each detour leaves
    behind one non-final face.  Order: new-face size, then the chosen
    positions, then the number of new vertices per gap.
    """
    _check_p(p)
    fi = selected_face(g)
    vs = g.faces[fi][0]
    m = len(vs)
    start = vs.index(min(vs))
    f = vs[start:] + vs[:start]
    others = [face for i, face in enumerate(g.faces) if i != fi]
    edges = g.edges()
    nv = g.vertex_count
    out = []
    for size in range(3, p + 4):
        for r in range(1, min(size, m)):
            # inner chosen positions between 0 and m-1
            for inner in itertools.combinations(range(1, m - 1), r - 1):
                pos = (0,) + inner + (m - 1,)
                gaps = list(zip(pos, pos[1:]))
                fresh_total = size - (r + 1)
                for counts in _compositions(fresh_total, len(gaps)):
                    succ = _cut(f, pos, gaps, counts, edges, nv)
                    if succ is not None:
                        new_face, remainders = succ
                        out.append(PlaneGraph(others + [(new_face, True)] + [(rv, False) for rv in remainders]))
    return out


def _cut(f, pos, gaps, counts, edges, nv):
    new_face: list[int] = []
    remainders = []
    nxt = nv
    for (a, b), c in zip(gaps, counts):
        new_face.append(f[a])
        if b == a + 1 and c == 0:
            continue  # the existing face edge
        if c == 0 and frozenset((f[a], f[b])) in edges:
            return None  # chord would double an existing edge
        path = list(range(nxt, nxt + c))
        nxt += c
        new_face.extend(path)
        remainders.append(tuple(f[a : b + 1]) + tuple(reversed(path)))
    new_face.append(f[pos[-1]])
    # pos[-1] == m-1 and the closing edge f(m-1) -> f0 is the kept face edge
    return tuple(new_face), remainders


# -- tameness --------------------------------------------------------------------


@dataclass(frozen=True)
class TamenessPredicate:
    """A named test on final graphs plus an optional pruning hook.

    ``prune(g)`` returning True discards a successor before triangle
    finalization; the default never prunes.
    """

    name: str
    accept: Callable[[PlaneGraph], bool]
    prune: Callable[[PlaneGraph], bool] = field(default=lambda g: False)


def _face_sizes_3_to_8(g: PlaneGraph) -> bool:
    return all(3 <= k <= 8 for k in g.face_sizes())


BASELINE = TamenessPredicate("face-size-3-8", _face_sizes_3_to_8)
ACCEPT_ALL = TamenessPredicate("accept-all", lambda g: True)


def finalize_triangles(g: PlaneGraph) -> PlaneGraph:
    return PlaneGraph((vs, final or len(vs) == 3) for vs, final in g.faces)


def next_tame(g: PlaneGraph, p: int, pred: TamenessPredicate = BASELINE) -> list[PlaneGraph]:
    """next_plane followed by pruning, triangle finalization and the final-graph filter."""
    out = []
    for s in next_plane(g, p):
        if pred.prune(s):
            continue
        s = finalize_triangles(s)
        if s.is_final and not pred.accept(s):
            continue
        out.append(s)
    return out


# -- enumeration -----------------------------------------------------------------


@dataclass
class Limits:
    max_vertices: int = 8
    max_graphs: int | None = None
    max_depth: int | None = None


@dataclass
class EnumerationSummary:
    p: int
    predicate: str
    explored: int = 0
    emitted: int = 0
    limits_hit: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "predicate": self.predicate,
            "explored": self.explored,
            "emitted": self.emitted,
            "limits_hit": self.limits_hit,
        }


def iter_enumerate(
    p: int,
    pred: TamenessPredicate | None = BASELINE,
    limits: Limits | None = None,
    summary: EnumerationSummary | None = None,
    visit: Callable[[PlaneGraph], None] | None = None,
) -> Iterator[PlaneGraph]:
    """Depth-first exploration from Seed_p, yielding final graphs.

    ``pred=None`` uses plain next_plane (every plane graph); otherwise
    next_tame with ``pred``.  Successors above ``max_vertices`` are dropped,
    so the output is exhaustive for graphs within that size.  ``visit`` sees
    every explored graph, final or not.
    """
    limits = limits or Limits()
    summary = summary or EnumerationSummary(p, "plane" if pred is None else pred.name)
    if limits.max_graphs == 0:
        return
    start = seed(p)
    if pred is not None:
        start = finalize_triangles(start)
    stack: list[tuple[PlaneGraph, int]] = [(start, 0)]
    while stack:
        g, depth = stack.pop()
        summary.explored += 1
        if visit is not None:
            visit(g)
        if g.is_final:
            if pred is None or pred.accept(g):
                summary.emitted += 1
                yield g
                if limits.max_graphs is not None and summary.emitted >= limits.max_graphs:
                    if stack:
                        summary.limits_hit.append("max_graphs")
                    return
            continue
        if limits.max_depth is not None and depth >= limits.max_depth:
            if "max_depth" not in summary.limits_hit:
                summary.limits_hit.append("max_depth")
            continue
        succ = next_plane(g, p) if pred is None else next_tame(g, p, pred)
        succ = [s for s in succ if s.vertex_count <= limits.max_vertices]
        stack.extend((s, depth + 1) for s in reversed(succ))


def enumerate_graphs(
    p: int,
    pred: TamenessPredicate | None = BASELINE,
    limits: Limits | None = None,
    unique: bool = True,
) -> tuple[list[PlaneGraph], EnumerationSummary]:
    """Collect :func:`iter_enumerate`; with ``unique`` keep one graph per isomorphism class."""
    summary = EnumerationSummary(p, "plane" if pred is None else pred.name)
    out = []
    seen: set = set()
    for g in iter_enumerate(p, pred, limits, summary):
        if unique:
            key = canonical_code(g)
            if key in seen:
                continue
            seen.add(key)
        out.append(g)
    return out, summary


# -- isomorphism -----------------------------------------------------------------


def _code_from(h: Hypermap, flags: Sequence[bool], s: int) -> tuple:
    label = {s: 0}
    order = [s]
    queue = deque([s])
    while queue:
        d = queue.popleft()
        for x in (h.f[d], h.e[d]):
            if x not in label:
                label[x] = len(order)
                order.append(x)
                queue.append(x)
    if len(order) != h.darts:
        raise MalformedGraph("graph is not connected")
    return tuple((label[h.f[d]], label[h.e[d]], flags[d]) for d in order)


def _codes(g: PlaneGraph) -> Iterator[tuple]:
    h, darts = hypermap_of(g)
    face_of = []
    for vs, final in g.faces:
        face_of.extend([final] * len(vs))
    for s in range(h.darts):
        yield _code_from(h, face_of, s)


def canonical_code(g: PlaneGraph) -> tuple:
    """Least dart-relabelling code over all start darts and both orientations.

    Equal codes mean an orientation-preserving or mirror isomorphism that also
    keeps final flags.
    """
    return min(itertools.chain(_codes(g), _codes(g.reversed())))


def isomorphic(g1: PlaneGraph, g2: PlaneGraph) -> bool:
    if (g1.vertex_count, g1.edge_count, g1.face_count) != (g2.vertex_count, g2.edge_count, g2.face_count):
        return False
    if sorted(g1.face_sizes()) != sorted(g2.face_sizes()):
        return False
    return canonical_code(g1) == canonical_code(g2)


def relabel(g: PlaneGraph, perm: Sequence[int], rotations: Sequence[int] | None = None) -> PlaneGraph:
    """Rename vertex ``v`` to ``perm[v]`` and rotate face ``i`` by ``rotations[i]``."""
    out = []
    for i, (vs, final) in enumerate(g.faces):
        k = rotations[i] % len(vs) if rotations else 0
        vs = vs[k:] + vs[:k]
        out.append((tuple(perm[v] for v in vs), final))
    return PlaneGraph(out)


# -- archives --------------------------------------------------------------------


@dataclass
class Archive:
    entries: list[tuple[str, PlaneGraph]] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def add(self, label: str, g: PlaneGraph) -> None:
        self.entries.append((label, g))

    def reduced(self) -> "Archive":
        """First representative of each isomorphism class."""
        seen = set()
        out = Archive()
        for label, g in self.entries:
            key = canonical_code(g)
            if key not in seen:
                seen.add(key)
                out.add(label, g)
        return out

    def dumps(self) -> str:
        lines = ["# rigorkit archive v1"]
        for label, g in self.entries:
            if not g.is_final:
                raise MalformedGraph(f"archive entry {label} is not final")
            if not label or any(ch.isspace() for ch in label):
                raise MalformedGraph(f"archive label {label!r} must be non-empty without spaces")
            faces = " ".join(",".join(map(str, vs)) for vs, _ in g.faces)
            lines.append(f"{label} {g.vertex_count} {g.face_count} {faces}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, source: str = "<memory>") -> "Archive":
        if text.lstrip().startswith("{") or text.lstrip().startswith("["):
            return cls.from_json(json.loads(text), source)
        arch = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ArchiveParseError("expected: label V F face...", source, lineno)
            label = parts[0]
            try:
                nverts, nfaces = int(parts[1]), int(parts[2])
                faces = [tuple(int(v) for v in tok.split(",")) for tok in parts[3:]]
            except ValueError:
                raise ArchiveParseError("non-integer count or vertex", source, lineno) from None
            if len(faces) != nfaces:
                raise ArchiveParseError(f"declared {nfaces} faces, found {len(faces)}", source, lineno)
            try:
                g = PlaneGraph((vs, True) for vs in faces)
            except MalformedGraph as err:
                raise ArchiveParseError(str(err), source, lineno) from None
            if g.vertex_count != nverts:
                raise ArchiveParseError(f"declared {nverts} vertices, found {g.vertex_count}", source, lineno)
            arch.add(label, g)
        return arch

    def to_json(self) -> dict:
        return {
            "format": "rigorkit.archive/1",
            "graphs": [{"label": label, "faces": [list(vs) for vs, _ in g.faces]} for label, g in self.entries],
        }

    @classmethod
    def from_json(cls, doc, source: str = "<memory>") -> "Archive":
        items = doc["graphs"] if isinstance(doc, dict) else doc
        arch = cls()
        for i, item in enumerate(items):
            try:
                arch.add(str(item["label"]), PlaneGraph((tuple(vs), True) for vs in item["faces"]))
            except (KeyError, TypeError, MalformedGraph) as err:
                raise ArchiveParseError(f"graph {i}: {err}", source) from None
        return arch

    @classmethod
    def load(cls, path: Path | str) -> "Archive":
        path = Path(path)
        return cls.loads(path.read_text(), str(path))


@dataclass
class ArchiveDiff:
    only_a: list[str]
    only_b: list[str]
    matched: list[tuple[list[str], list[str]]]

    @property
    def empty(self) -> bool:
        return not self.only_a and not self.only_b

    def to_json(self) -> dict:
        return {
            "only_a": self.only_a,
            "only_b": self.only_b,
            "matched": [{"a": a, "b": b} for a, b in self.matched],
        }


def archive_diff(a: Archive, b: Archive) -> ArchiveDiff:
    """Partition both archives by isomorphism class."""
    classes: dict[tuple, tuple[list[str], list[str]]] = {}
    order: list[tuple] = []
    for side, arch in ((0, a), (1, b)):
        for label, g in arch.entries:
            key = canonical_code(g)
            if key not in classes:
                classes[key] = ([], [])
                order.append(key)
            classes[key][side].append(label)
    only_a, only_b, matched = [], [], []
    for key in order:
        la, lb = classes[key]
        if la and lb:
            matched.append((la, lb))
        elif la:
            only_a.extend(la)
        else:
            only_b.extend(lb)
    return ArchiveDiff(only_a, only_b, matched)
