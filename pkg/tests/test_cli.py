import io
import json
import subprocess
import sys
from fractions import Fraction

import mpmath

from rigorkit.cli import EXIT_FAIL, EXIT_IO, EXIT_OK, EXIT_USAGE, main


def run(*argv):
    out = io.StringIO()
    status = main(list(argv), out=out)
    return status, out.getvalue()


def test_constants_pt():
    status, text = run("constants", "--name", "pt", "--bits", "64")
    assert status == EXIT_OK
    lo, hi = (Fraction(v) for v in text.split("[")[1].rstrip("]\n").split(", "))
    with mpmath.workdps(60):
        pt = 4 * mpmath.atan(mpmath.sqrt(2) / 5) - mpmath.pi / 3
        assert mpmath.mpf(lo.numerator) / lo.denominator <= pt <= mpmath.mpf(hi.numerator) / hi.denominator
    assert hi - lo <= Fraction(1, 2**60)


def test_constants_all():
    status, text = run("constants")
    assert status == EXIT_OK and len(text.splitlines()) == 5


def test_corpus_main_entry_proven():
    status, text = run("corpus", "run", "--filter", "586468779")
    assert status == EXIT_OK
    row = text.splitlines()[1]
    assert row.startswith("586468779") and "Proven" in row


def test_corpus_list():
    status, text = run("corpus", "list")
    assert status == EXIT_OK and len(text.splitlines()) == 25


def test_corpus_no_match():
    assert run("corpus", "run", "--filter", "nothing-*")[0] == EXIT_FAIL


def test_enumerate_deterministic():
    a = run("enumerate", "--p", "0", "--max-vertices", "5")
    b = run("enumerate", "--p", "0", "--max-vertices", "5")
    assert a == b and a[0] == EXIT_OK
    assert a[1].splitlines() == ["# rigorkit archive v1", "p0-00000 3 2 0,1,2 0,2,1"]


def test_enumerate_plane_listing():
    status, text = run("enumerate", "--p", "0", "--max-vertices", "5", "--plane")
    assert status == EXIT_OK
    # the tetrahedron, the triangle pair and the triangular bipyramid
    assert sorted(line.split()[1] for line in text.splitlines()[1:]) == ["3", "4", "5"]


def test_enumerate_json_and_diff(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.json"
    assert run("enumerate", "--p", "1", "--max-vertices", "6", "--plane", "--out", str(a))[0] == EXIT_OK
    assert run("enumerate", "--p", "1", "--max-vertices", "6", "--plane", "--format", "json", "--out", str(b))[0] == EXIT_OK
    status, text = run("archive-diff", str(a), str(b))
    assert status == EXIT_OK and "only_a    0" in text
    c = tmp_path / "c.txt"
    run("enumerate", "--p", "1", "--max-vertices", "5", "--plane", "--out", str(c))
    assert run("archive-diff", str(a), str(c))[0] == EXIT_FAIL


def test_bound_delta():
    status, text = run("bound", "delta", "--cube", "2:2.51:6")
    assert status == EXIT_OK
    assert "enclosure [128," in text


def test_bound_interval_method():
    status, text = run("bound", "delta", "--method", "interval")
    assert status == EXIT_OK and "method    interval" in text


def test_prove_exit_codes(tmp_path):
    f = tmp_path / "x.json"
    f.write_text(json.dumps({"expr": {"op": "var", "index": 0}, "box": [["0", "1"]]}))
    assert run("prove", str(f), "--bound", "1")[0] == EXIT_OK
    status, text = run("prove", str(f), "--bound", "1/2")
    assert status == EXIT_FAIL and "Counterexample" in text
    assert run("prove", str(f), "--bound", "1", "--relation", "<")[0] == EXIT_USAGE
    assert run("prove", str(f), "--bound", "2", "--relation", "<", "--epsilon", "1/2")[0] == EXIT_OK


def test_usage_errors():
    assert run()[0] == EXIT_USAGE
    assert run("nope")[0] == EXIT_USAGE
    assert run("bound", "no-such-expr")[0] == EXIT_USAGE
    assert run("enumerate", "--p", "9")[0] == EXIT_USAGE
    assert run("prove", "delta", "--bound", "banana")[0] == EXIT_USAGE


def test_io_errors(tmp_path):
    assert run("lp-check", "--system", str(tmp_path / "missing.txt"))[0] == EXIT_IO
    bad = tmp_path / "bad.txt"
    bad.write_text("not an archive line\n")
    assert run("archive-diff", str(bad), str(bad))[0] == EXIT_IO


def test_lp_check(tmp_path):
    system = tmp_path / "s.txt"
    system.write_text("x <= 1\n-x <= -2\n0 <= x <= 3\n")
    cert = tmp_path / "y.txt"
    cert.write_text("(1.0, 1.0)\n")
    status, text = run("lp-check", "--system", str(system), "--certificate", str(cert))
    assert status == EXIT_OK and "Refuted" in text
    assert run("lp-check", "--system", str(system))[0] == EXIT_OK
    system.write_text("x <= 1\n0 <= x <= 3\n")
    cert.write_text("(1.0)\n")
    assert run("lp-check", "--system", str(system), "--certificate", str(cert))[0] == EXIT_FAIL


def test_manifest(tmp_path):
    m = tmp_path / "m.json"
    run("corpus", "run", "--filter", "diam-lo-A*", "--manifest", str(m))
    a = json.loads(m.read_text())
    run("corpus", "run", "--filter", "diam-lo-A*", "--manifest", str(m))
    b = json.loads(m.read_text())
    assert a["exit_status"] == 0 and a["tool"] == "rigorkit"
    assert a["inputs"] and all(len(h) == 64 for h in a["inputs"].values())
    for doc in (a, b):
        doc.pop("timing")
        doc.pop("host")
        for t in doc["tasks"]:
            t.pop("seconds", None)
    assert a == b


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "rigorkit.cli", "constants", "--name", "pi"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("PI")
    proc = subprocess.run([sys.executable, "-m", "rigorkit.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for command in ("bound", "prove", "corpus", "enumerate", "archive-diff", "lp-check", "constants"):
        assert command in proc.stdout
