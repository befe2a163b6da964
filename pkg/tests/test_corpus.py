import json
import math
from fractions import Fraction

import numpy as np
import pytest

from rigorkit.corpus import (
    CorpusError,
    Method,
    NamedInequality,
    Provenance,
    builtin_entries,
    corpus_dir,
    load_corpus,
    load_file,
    run_corpus,
    write_corpus,
)
from rigorkit.expr import Box, Var, Verdict, eval_interval

x = Var(0)


@pytest.fixture(scope="module")
def corpus():
    return {e.id: e for e in load_corpus()}


def test_shipped_files_match_builders(corpus):
    built = {e.id: e for e in builtin_entries()}
    assert set(built) == set(corpus)
    for ident, entry in built.items():
        assert (corpus_dir() / f"{ident}.json").read_text() == entry.dumps()


def test_inventory(corpus):
    diam = [e for e in corpus.values() if e.id.startswith("diam-")]
    dih = [e for e in corpus.values() if e.id.startswith("dih-")]
    assert len(diam) == 16 and all(e.provenance is Provenance.PAPER_STATED for e in diam)
    assert len(dih) == 8 and all(e.provenance is Provenance.RECONSTRUCTED for e in dih)
    main = corpus["586468779"]
    assert main.method is Method.BERNSTEIN and main.provenance is Provenance.PAPER_STATED


def test_round_trip(tmp_path):
    paths = write_corpus(tmp_path)
    assert len(paths) == len(builtin_entries())
    for path in paths:
        entry = load_file(path)
        assert entry.dumps() == path.read_text()
        assert NamedInequality.from_json(json.loads(entry.dumps())).to_json() == entry.to_json()


def test_lets_are_shared(corpus):
    entry = corpus["dih-double-cross-d12b"]
    names = dict(entry.lets)
    assert entry.assumptions[0] is names["delta"]


def test_parse_error_reports_line(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "schema": "rigorkit.inequality/1",\n "id": \n}\n')
    with pytest.raises(CorpusError) as info:
        load_file(bad)
    assert info.value.line == 4
    assert str(bad) in str(info.value)


def test_schema_checked(tmp_path):
    doc = json.loads(builtin_entries()[1].dumps())
    doc["schema"] = "something/else"
    path = tmp_path / "x.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(CorpusError):
        load_file(path)


def test_diameter_entries_proven(corpus):
    report = run_corpus("diam-*", entries=corpus.values())
    assert len(report.rows) == 16
    assert report.ok
    assert all(r.verdict is Verdict.PROVEN for r in report.rows)


@pytest.mark.parametrize("ident", ["dih-double-cross-d12b", "dih-double-cross-d34", "dih-double-cross-d12a"])
def test_small_dihedral_entries(corpus, ident):
    assert corpus[ident].verify().proven


def _vertex_diameter(y: float) -> float:
    # the corpus reduction: max distance among the corners of X
    worst = 0.0
    for entry in builtin_entries():
        if not entry.id.startswith("diam-"):
            continue
        (lo, hi), = entry.box.bounds
        v = Fraction(12, 5) - Fraction(y).limit_denominator(10**6) if entry.variables == ("s",) else Fraction(y).limit_denominator(10**6)
        if lo <= v <= hi:
            iv = eval_interval(entry.expr, Box([(v, v)]), 80)
            worst = max(worst, math.sqrt(float(iv.hi_q)))
    return worst


@pytest.mark.parametrize("y", [2.0, 2.2, 2.4, 2.45, 2.51])
def test_diameter_reduction_by_sampling(y):
    # independent check: sample the region itself and compare with the corner distances
    rng = np.random.default_rng(7)
    v, w = np.array([0.0, 0.0]), np.array([2.0, 0.0])
    ux = (2.51**2 - y**2 + 4) / 4
    u = np.array([ux, math.sqrt(2.51**2 - ux**2)])
    ab = rng.random((200_000, 2))
    ab = np.where(ab.sum(axis=1, keepdims=True) > 1, 1 - ab, ab)
    pts = v + ab[:, :1] * (w - v) + ab[:, 1:] * (u - v)
    keep = np.all([np.linalg.norm(pts - c, axis=1) >= 1.2 for c in (u, v, w)], axis=0)
    pts = pts[keep]
    hull = pts[np.argsort(pts[:, 0])][:: max(1, len(pts) // 3000)]
    d = np.sqrt(((hull[:, None, :] - hull[None, :, :]) ** 2).sum(-1)).max()
    corner = _vertex_diameter(y)
    assert d <= corner + 1e-9
    assert corner < 1.044


def test_reconstructed_failure_is_warning():
    bogus = NamedInequality(
        id="dih-bogus",
        expr=x,
        box=Box([(0, 1)]),
        relation="<=",
        bound=Fraction(1, 2),
        method=Method.INTERVAL_BB,
        provenance=Provenance.RECONSTRUCTED,
    )
    report = run_corpus(entries=[bogus])
    assert report.ok
    assert report.rows[0].verdict is Verdict.COUNTEREXAMPLE
    assert "witness" in report.rows[0].warning


def test_stated_entry_failure_fails():
    bogus = NamedInequality(
        id="x",
        expr=x,
        box=Box([(0, 1)]),
        relation=">=",
        bound=Fraction(1, 2),
        method=Method.INTERVAL_BB,
        provenance=Provenance.PAPER_STATED,
    )
    assert not run_corpus(entries=[bogus]).ok


def test_strict_relation_uses_epsilon():
    tight = NamedInequality(
        id="t", expr=x * x, box=Box([(0, 1)]), relation="<", bound=1,
        method=Method.INTERVAL_BB, provenance=Provenance.PAPER_STATED,
        epsilon=Fraction(1, 100),
    )
    assert not tight.verify().proven
    loose = NamedInequality(
        id="t", expr=x * x, box=Box([(0, 1)]), relation="<", bound=Fraction(102, 100),
        method=Method.INTERVAL_BB, provenance=Provenance.PAPER_STATED,
        epsilon=Fraction(1, 100),
    )
    assert loose.verify().proven


def test_report_order_and_filter(corpus):
    report = run_corpus("diam-hi-A*", entries=corpus.values())
    ids = [r.id for r in report.rows]
    assert ids == sorted(ids) and all(i.startswith("diam-hi-A") for i in ids)
    table = report.table()
    assert table.splitlines()[1].startswith(ids[0])
