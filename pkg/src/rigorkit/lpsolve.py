"""Untrusted solver process: ``python -m rigorkit.lpsolve system.lp``.

Reads a CPLEX LP file with HiGHS.  When the model is infeasible, prints the
Farkas multipliers of the ``<=`` rows as ``y <row> <value>`` lines.  Nothing
printed here is trusted; the caller re-checks it in exact arithmetic.
"""

from __future__ import annotations

import sys


def solve(path: str) -> tuple[str, list[tuple[str, float]]]:
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    # presolve can decide infeasibility without producing a ray
    h.setOptionValue("presolve", "off")
    if h.readModel(path) != highspy.HighsStatus.kOk:
        raise ValueError(f"could not read {path}")
    h.run()
    status = h.modelStatusToString(h.getModelStatus()).lower()
    if status != "infeasible":
        return status, []
    _, has_ray, ray = h.getDualRay()
    if not has_ray:
        return "infeasible-no-ray", []
    lp = h.getLp()
    return "infeasible", [(name, -float(v)) for name, v in zip(lp.row_names_, ray)]


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m rigorkit.lpsolve <file.lp>", file=sys.stderr)
        return 2
    try:
        status, duals = solve(argv[0])
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    print(f"status {status}")
    for name, value in duals:
        print(f"y {name} {value!r}")
    return 0 if duals else 1


if __name__ == "__main__":
    sys.exit(main())
