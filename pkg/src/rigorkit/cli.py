"""The ``rigorkit`` command line."""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__
from .bernstein import BudgetExhausted, bernstein_verify, range_enclosure
from .corpus import CorpusError, corpus_dir, load_corpus, run_corpus
from .expr import Box, DomainError, Expr, eval_interval, from_json, to_poly, verify_lower, verify_upper
from .graphs import BASELINE, Archive, ArchiveParseError, Limits, MalformedGraph, archive_diff, enumerate_graphs
from .lp import (
    BridgeError,
    ConstraintFile,
    MissingBounds,
    ParseError,
    check_certificate,
    normalize,
    parse_certificate,
    refute,
)
from .numeric import ConstantName, Interval, enclose_constant

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

BUILTIN_EXPRS = ("delta", "a0", "a1", "a2", "a3", "gamma", "p")


class UsageError(Exception):
    pass


class Run:
    """Collects what goes into the JSON manifest."""

    def __init__(self, command: str, argv: Sequence[str]):
        self.command = command
        self.argv = list(argv)
        self.inputs: dict[str, str] = {}
        self.tasks: list[dict] = []
        self.started = time.time()

    def hash_file(self, path: Path | str) -> None:
        path = Path(path)
        self.inputs[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()

    def task(self, ident: str, verdict: str, seconds: float | None = None, **extra) -> None:
        row = {"id": ident, "verdict": verdict, **extra}
        if seconds is not None:
            row["seconds"] = round(seconds, 3)
        self.tasks.append(row)

    def manifest(self, status: int) -> dict:
        return {
            "tool": "rigorkit",
            "version": __version__,
            "command": self.command,
            "arguments": self.argv,
            "inputs": dict(sorted(self.inputs.items())),
            "tasks": self.tasks,
            "exit_status": status,
            "timing": {"started": self.started, "seconds": round(time.time() - self.started, 3)},
            "host": {"python": platform.python_version(), "platform": platform.platform()},
        }


# -- helpers ---------------------------------------------------------------------


def _fmt(q: Fraction, digits: int = 12) -> str:
    return f"{float(q):.{digits}g}"


def _show_interval(iv: Interval) -> str:
    return f"[{_fmt(iv.lo_q)}, {_fmt(iv.hi_q)}]"


def _parse_box(args, default: Box | None) -> Box:
    if args.box:
        try:
            data = json.loads(args.box)
            return Box((Fraction(str(lo)), Fraction(str(hi))) for lo, hi in data)
        except (ValueError, TypeError) as err:
            raise UsageError(f"--box expects JSON like [[2, 2.51], [0, 1]]: {err}") from None
    if args.cube:
        try:
            lo, hi, n = args.cube.split(":")
            return Box.cube(Fraction(lo), Fraction(hi), int(n))
        except ValueError:
            raise UsageError("--cube expects LO:HI:N, e.g. 2:2.51:6") from None
    if default is None:
        raise UsageError("give --box or --cube")
    return default


def _load_expr(spec: str, run: Run) -> tuple[Expr, Box | None]:
    from .kepler import KEPLER_BOX, build_gamma, delta_expr, a_expr, p_expr

    key = spec.lower()
    if key in BUILTIN_EXPRS:
        if key == "delta":
            return delta_expr(), KEPLER_BOX
        if key == "gamma":
            return build_gamma(), KEPLER_BOX
        if key == "p":
            return p_expr(), KEPLER_BOX
        return a_expr(key.upper()), KEPLER_BOX
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"{spec!r} is neither a file nor one of {', '.join(BUILTIN_EXPRS)}")
    run.hash_file(path)
    doc = json.loads(path.read_text())
    if isinstance(doc, dict) and "expr" in doc:
        box = Box(doc["box"]) if "box" in doc else None
        return from_json(doc["expr"]), box
    return from_json(doc), None


def _parse_bound(text: str):
    try:
        return Fraction(text)
    except ValueError:
        try:
            return ConstantName.parse(text)
        except ValueError:
            raise UsageError(f"bound {text!r} is neither a rational nor a constant name") from None


# -- subcommands -----------------------------------------------------------------


def cmd_bound(args, run: Run, out) -> int:
    e, default_box = _load_expr(args.expr, run)
    box = _parse_box(args, default_box)
    if args.method == "bernstein":
        try:
            poly = to_poly(e, len(box))
        except (ValueError, TypeError) as err:
            raise UsageError(f"Bernstein bounds need a polynomial expression: {err}") from None
        stats: dict = {}
        start = time.perf_counter()
        try:
            iv = range_enclosure(poly, list(box), Fraction(args.tolerance), args.budget, stats)
            verdict = "Enclosed"
        except BudgetExhausted as err:
            iv, verdict = err.enclosure, "BudgetExhausted"
            stats["boxes"] = err.boxes
        seconds = time.perf_counter() - start
        print(f"method    bernstein", file=out)
        print(f"boxes     {stats.get('boxes')}", file=out)
        if "sample_lo" in stats:
            print(f"attained  [{_fmt(stats['sample_lo'])}, {_fmt(stats['sample_hi'])}]", file=out)
    else:
        start = time.perf_counter()
        iv = eval_interval(e, box, args.bits)
        seconds = time.perf_counter() - start
        verdict = "Enclosed"
        print("method    interval", file=out)
    print(f"enclosure {_show_interval(iv)}", file=out)
    print(f"exact     [{iv.lo_q}, {iv.hi_q}]", file=out)
    run.task(args.expr, verdict, seconds, lo=str(iv.lo_q), hi=str(iv.hi_q))
    return EXIT_OK if verdict == "Enclosed" else EXIT_FAIL


def cmd_prove(args, run: Run, out) -> int:
    e, default_box = _load_expr(args.expr, run)
    box = _parse_box(args, default_box)
    bound = _parse_bound(args.bound)
    rel = args.relation
    eps = Fraction(args.epsilon)
    if rel in ("<", ">") and eps <= 0:
        raise UsageError("strict relations need --epsilon > 0")
    upper = rel in ("<=", "<")
    target = bound
    if rel in ("<", ">"):
        shift = -eps if upper else eps
        target = (enclose_constant(bound, args.bits) if isinstance(bound, ConstantName) else Interval(bound)) + Interval.enclose(shift, prec=args.bits)
    start = time.perf_counter()
    if args.method == "bernstein":
        report = bernstein_verify(to_poly(e, len(box)), box, target, upper, args.budget)
    else:
        fn = verify_upper if upper else verify_lower
        report = fn(e, box, target, args.budget, args.bits)
    seconds = time.perf_counter() - start
    print(f"claim     {args.expr} {rel} {args.bound}" + (f" (epsilon {eps})" if rel in ('<', '>') else ""), file=out)
    print(f"verdict   {report.verdict.value}", file=out)
    print(f"boxes     {report.boxes_examined}", file=out)
    print(f"depth     {report.max_depth}", file=out)
    if report.witness is not None:
        print(f"witness   {report.witness}", file=out)
    run.task(args.expr, report.verdict.value, seconds, boxes=report.boxes_examined)
    return EXIT_OK if report.proven else EXIT_FAIL


def cmd_corpus(args, run: Run, out) -> int:
    directory = Path(args.dir) if args.dir else corpus_dir()
    entries = load_corpus(directory)
    for path in sorted(directory.glob("*.json")):
        run.hash_file(path)
    if args.action == "list":
        for e in entries:
            print(f"{e.id:<34} {e.provenance.value:<13} {e.method.value:<10} {e.title}", file=out)
        return EXIT_OK
    report = run_corpus(args.filter, args.budget, entries, jobs=args.jobs)
    if not report.rows:
        print(f"no corpus entry matches {args.filter!r}", file=out)
        return EXIT_FAIL
    print(report.table(), file=out)
    for r in report.rows:
        run.task(r.id, r.verdict.value, r.seconds, provenance=r.provenance.value, boxes=r.boxes)
        if r.warning:
            print(f"warning: {r.id}: {r.warning}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_enumerate(args, run: Run, out) -> int:
    if not 0 <= args.p <= 5:
        raise UsageError("--p must be in 0..5")
    pred = None if args.plane else BASELINE
    limits = Limits(args.max_vertices, args.max_graphs, args.max_depth)
    graphs, summary = enumerate_graphs(args.p, pred, limits, unique=not args.all)
    arch = Archive()
    for i, g in enumerate(graphs):
        arch.add(f"p{args.p}-{i:05d}", g.normalized())
    text = json.dumps(arch.to_json(), indent=1) + "\n" if args.format == "json" else arch.dumps()
    if args.out:
        Path(args.out).write_text(text)
        run.hash_file(args.out)
    else:
        out.write(text)
    mode = "plane" if args.plane else "tame"
    info = f"p={args.p} mode={mode} max_vertices={args.max_vertices} explored={summary.explored} graphs={len(graphs)}"
    if summary.limits_hit:
        info += " limits_hit=" + ",".join(summary.limits_hit)
    print(info, file=sys.stderr if not args.out else out)
    run.task(f"enumerate-p{args.p}", "Completed", graphs=len(graphs), explored=summary.explored)
    return EXIT_OK


def cmd_archive_diff(args, run: Run, out) -> int:
    a, b = Archive.load(args.a), Archive.load(args.b)
    run.hash_file(args.a)
    run.hash_file(args.b)
    diff = archive_diff(a, b)
    print(f"graphs    a={len(a)} b={len(b)}", file=out)
    print(f"matched   {len(diff.matched)} classes", file=out)
    for la, lb in diff.matched:
        if len(la) > 1 or len(lb) > 1:
            print(f"  {' '.join(la)} = {' '.join(lb)}", file=out)
    print(f"only_a    {len(diff.only_a)}" + ("  " + " ".join(diff.only_a) if diff.only_a else ""), file=out)
    print(f"only_b    {len(diff.only_b)}" + ("  " + " ".join(diff.only_b) if diff.only_b else ""), file=out)
    run.task("archive-diff", "Equal" if diff.empty else "Different", only_a=len(diff.only_a), only_b=len(diff.only_b))
    return EXIT_OK if diff.empty else EXIT_FAIL


def cmd_lp_check(args, run: Run, out) -> int:
    system = normalize(ConstraintFile.load(args.system), args.bits)
    run.hash_file(args.system)
    start = time.perf_counter()
    if args.certificate:
        run.hash_file(args.certificate)
        try:
            cert = parse_certificate(Path(args.certificate).read_text(), system)
        except BridgeError as err:
            print(f"verdict   NotRefuted\nreason    {err}", file=out)
            run.task(args.system, "NotRefuted", time.perf_counter() - start)
            return EXIT_FAIL
        result = check_certificate(system, cert)
    else:
        result = refute(system, args.solver, args.timeout)
    m, n = system.shape
    print(f"system    {m} rows, {n} variables", file=out)
    print(f"verdict   {result.verdict.value}", file=out)
    if result.lhs_lo is not None:
        print(f"combined  lower(yA x) = {_fmt(result.lhs_lo)} vs upper(y b) = {_fmt(result.rhs_hi)}", file=out)
    if result.reason:
        print(f"reason    {result.reason}", file=out)
    run.task(args.system, result.verdict.value, time.perf_counter() - start)
    return EXIT_OK if result.refuted else EXIT_FAIL


def cmd_constants(args, run: Run, out) -> int:
    names = [ConstantName.parse(args.name)] if args.name else list(ConstantName)
    for name in names:
        iv = enclose_constant(name, args.bits)
        print(f"{name.value:<18} {iv.lo_q.numerator / iv.lo_q.denominator:.17g}  [{iv.lo_q}, {iv.hi_q}]", file=out)
        run.task(name.value, "Enclosed", lo=str(iv.lo_q), hi=str(iv.hi_q))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", metavar="FILE", help="write a JSON run manifest to FILE")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (corpus runs)")

    parser = argparse.ArgumentParser(prog="rigorkit", description="Rigorous numerics for nonlinear inequalities, plane graphs and linear certificates.")
    parser.add_argument("--version", action="version", version=f"rigorkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def box_options(p):
        p.add_argument("--box", help="JSON list of [lo, hi] pairs")
        p.add_argument("--cube", help="LO:HI:N, the cube [LO, HI]^N")
        p.add_argument("--bits", type=int, default=64, help="interval precision in bits")

    p = sub.add_parser("bound", parents=[common], help="enclose the range of an expression over a box")
    p.add_argument("expr", help=f"one of {', '.join(BUILTIN_EXPRS)} or a JSON expression file")
    box_options(p)
    p.add_argument("--method", choices=["bernstein", "interval"], default="bernstein")
    p.add_argument("--tolerance", default="1/1000", help="Bernstein refinement tolerance")
    p.add_argument("--budget", type=int, default=10_000)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("prove", parents=[common], help="prove expr RELATION bound on a box")
    p.add_argument("expr", help=f"one of {', '.join(BUILTIN_EXPRS)} or a JSON expression file")
    box_options(p)
    p.add_argument("--relation", choices=["<=", ">=", "<", ">"], default="<=")
    p.add_argument("--bound", required=True, help="rational (e.g. 501, 13/10) or constant name (pt, pi)")
    p.add_argument("--epsilon", default="0", help="margin for strict relations")
    p.add_argument("--method", choices=["interval", "bernstein"], default="interval")
    p.add_argument("--budget", type=int, default=100_000)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("corpus", parents=[common], help="run or list the inequality corpus")
    p.add_argument("action", choices=["run", "list"])
    p.add_argument("--filter", default="*", help="glob on entry ids")
    p.add_argument("--budget", type=int, default=None, help="override each entry's box budget")
    p.add_argument("--dir", help="corpus directory (default: the packaged corpus)")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("enumerate", parents=[common], help="enumerate final graphs from Seed_p")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--max-vertices", type=int, default=6)
    p.add_argument("--max-graphs", type=int, default=None)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--plane", action="store_true", help="all plane graphs (no tameness filter)")
    p.add_argument("--all", action="store_true", help="keep isomorphic duplicates")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--out", help="write the archive here instead of standard output")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("archive-diff", parents=[common], help="compare two archives up to isomorphism")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_archive_diff)

    p = sub.add_parser("lp-check", parents=[common], help="refute an interval linear system")
    p.add_argument("--system", required=True, help="constraint file")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--certificate", help="solver output with the multipliers")
    group.add_argument("--solver", help="solver command (default: $RIGORKIT_LP_SOLVER or the bundled HiGHS bridge)")
    p.add_argument("--timeout", type=float, default=60)
    p.add_argument("--bits", type=int, default=64)
    p.set_defaults(func=cmd_lp_check)

    p = sub.add_parser("constants", parents=[common], help="print rigorous enclosures of named constants")
    p.add_argument("--name", help="pi, sqrt2, pt, delta_oct, atan_sqrt2_over_5 (default: all)")
    p.add_argument("--bits", type=int, default=64)
    p.set_defaults(func=cmd_constants)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    run = Run(args.command, argv)
    try:
        status = args.func(args, run, out)
    except UsageError as err:
        print(f"rigorkit: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, CorpusError, ArchiveParseError, ParseError, MissingBounds, MalformedGraph, json.JSONDecodeError) as err:
        print(f"rigorkit: {err}", file=sys.stderr)
        status = EXIT_IO
    except (DomainError, ValueError) as err:
        print(f"rigorkit: {err}", file=sys.stderr)
        status = EXIT_USAGE
    if args.manifest:
        try:
            Path(args.manifest).write_text(json.dumps(run.manifest(status), indent=1) + "\n")
        except OSError as err:
            print(f"rigorkit: cannot write manifest: {err}", file=sys.stderr)
            return EXIT_IO
    return status


if __name__ == "__main__":
    sys.exit(main())
