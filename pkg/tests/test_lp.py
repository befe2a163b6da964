import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from rigorkit.lp import (
    BridgeError,
    ConstraintFile,
    FarkasCertificate,
    IntervalLinearSystem,
    MissingBounds,
    ParseError,
    Verdict,
    check_certificate,
    emit_lp,
    normalize,
    parse_certificate,
    refute,
)
from rigorkit.numeric import ConstantName, enclose_constant


def fm_feasible(A, b, lo, hi) -> bool:
    """Exact Fourier-Motzkin elimination on A x <= b plus the box."""
    n = len(lo)
    rows = [(list(map(Fraction, a)), Fraction(c)) for a, c in zip(A, b)]
    for j in range(n):
        e = [Fraction(0)] * n
        e[j] = Fraction(1)
        rows.append((e, Fraction(hi[j])))
        rows.append(([-v for v in e], -Fraction(lo[j])))
    for j in range(n):
        pos, neg, zero = [], [], []
        for a, c in rows:
            (pos if a[j] > 0 else neg if a[j] < 0 else zero).append((a, c))
        rows = zero
        for ap, cp in pos:
            for an, cn in neg:
                s, t = -an[j], ap[j]
                rows.append(([s * u + t * v for u, v in zip(ap, an)], s * cp + t * cn))
    return all(c >= 0 for _, c in rows)


def test_fm_oracle_sanity():
    assert fm_feasible([[1], [-1]], [1, -1], [0], [3])
    assert not fm_feasible([[1], [-1]], [1, -2], [0], [3])
    assert not fm_feasible([[1, 1]], [-1], [0, 0], [1, 1])


# -- normalize -------------------------------------------------------------------


def test_pi_coefficient():
    s = normalize(ConstraintFile.loads("pi*x1 <= 4\n0 <= x1 <= 2\n"))
    assert s.shape == (1, 1)
    assert (s.A_lo[0][0], s.A_hi[0][0]) == (enclose_constant(ConstantName.PI, 64).lo_q, enclose_constant(ConstantName.PI, 64).hi_q)
    assert s.A_lo[0][0] < s.A_hi[0][0]
    assert s.b_hi == (4,)


def test_equality_splits():
    s = normalize(ConstraintFile.loads("e: x1 = 1\n0 <= x1 <= 2\n"))
    assert s.rows == ("e_le", "e_ge")
    assert s.A_lo == ((1,), (-1,)) and s.b_hi == (1, -1)


def test_two_by_one():
    s = normalize(ConstraintFile.loads("x <= 1\n-x <= -2\n0 <= x <= 3\n"))
    assert s.shape == (2, 1)
    assert (s.x_lo, s.x_hi) == ((0,), (3,))


def test_ge_and_constants_move():
    s = normalize(ConstraintFile.loads("2*x + 1 >= y - 3\n0 <= x <= 1\n-1 <= y <= 1\n"))
    # -(2x - y + 4) <= 0  ->  -2x + y <= 4
    assert s.A_lo == ((-2, 1),) and s.b_hi == (4,)


def test_parse_errors():
    with pytest.raises(ParseError) as info:
        ConstraintFile.loads("x <= 1\nx*y <= 2\n")
    assert info.value.line == 2
    with pytest.raises(ParseError):
        ConstraintFile.loads("x + 1\n")
    with pytest.raises(ParseError):
        ConstraintFile.loads("a: x <= 1\na: x >= 0\n")


def test_missing_bounds():
    with pytest.raises(MissingBounds):
        normalize(ConstraintFile.loads("x + y <= 1\n0 <= x <= 1\n"))


def test_invalid_system_rejected():
    with pytest.raises(ValueError):
        IntervalLinearSystem.exact([[1]], [1], [2], [1])


# -- check_certificate -----------------------------------------------------------


def test_spec_refutation():
    s = IntervalLinearSystem.exact([[1], [-1]], [1, -2], [0], [3])
    r = check_certificate(s, [1, 1])
    assert r.verdict is Verdict.REFUTED
    assert (r.lhs_lo, r.rhs_hi) == (0, -1)


def test_feasible_never_refuted():
    s = IntervalLinearSystem.exact([[1]], [1], [0], [3])
    for y in (0, 1, Fraction(1, 3), 10**9):
        assert check_certificate(s, [y]).verdict is Verdict.NOT_REFUTED


def test_certificate_checks():
    s = IntervalLinearSystem.exact([[1], [-1]], [1, -2], [0], [3])
    with pytest.raises(ValueError):
        check_certificate(s, [1])
    with pytest.raises(ValueError):
        FarkasCertificate((1, -1))


def random_system(rng: random.Random, m: int, n: int, planted):
    A = [[Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(n)] for _ in range(m)]
    b = [sum(a * x for a, x in zip(row, planted)) + Fraction(rng.randint(0, 5), rng.randint(1, 3)) for row in A]
    return A, b


def adversarial_multipliers(rng: random.Random, m: int):
    yield [Fraction(1)] * m
    yield [Fraction(rng.randint(0, 10**6), rng.randint(1, 10**3)) for _ in range(m)]
    one_hot = [Fraction(0)] * m
    one_hot[rng.randrange(m)] = Fraction(10**12)
    yield one_hot
    yield [Fraction(rng.choice([0, 0, 1, 7]), rng.randint(1, 9)) for _ in range(m)]


def test_planted_feasible_fuzz(rng):
    false_refuted = 0
    for _ in range(1000):
        n, m = rng.randint(1, 4), rng.randint(1, 8)
        planted = [Fraction(rng.randint(-20, 20), 4) for _ in range(n)]
        A, b = random_system(rng, m, n, planted)
        lo = [x - rng.randint(0, 4) for x in planted]
        hi = [x + rng.randint(0, 4) for x in planted]
        # interval version: widen A around the true matrix, true system stays inside
        A_lo = [[a - Fraction(rng.randint(0, 2), 8) for a in row] for row in A]
        A_hi = [[a + Fraction(rng.randint(0, 2), 8) for a in row] for row in A]
        s = IntervalLinearSystem(
            tuple(f"x{j}" for j in range(n)), tuple(f"r{i}" for i in range(m)),
            tuple(map(tuple, A_lo)), tuple(map(tuple, A_hi)), tuple(b), tuple(lo), tuple(hi),
        )
        for y in adversarial_multipliers(rng, m):
            false_refuted += check_certificate(s, y).refuted
    assert false_refuted == 0


def infeasible_system(rng: random.Random):
    """A feasible core plus one row contradicting a non-negative combination of it,
    or a row that no point of the box satisfies."""
    n, m = rng.randint(2, 3), rng.randint(2, 5)
    planted = [Fraction(rng.randint(-8, 8), 2) for _ in range(n)]
    A, b = random_system(rng, m, n, planted)
    if rng.random() < 0.7:
        lam = [Fraction(rng.randint(0, 3)) for _ in range(m)]
        lam[rng.randrange(m)] += 1
        row = [-sum(l * a[j] for l, a in zip(lam, A)) for j in range(n)]
        rhs = -sum(l * c for l, c in zip(lam, b)) - Fraction(rng.randint(1, 8), 4)
    else:
        row = [Fraction(rng.randint(-5, 5)) for _ in range(n)]
        row[0] = row[0] or Fraction(1)
        rhs = sum(min(a * (x - 5), a * (x + 5)) for a, x in zip(row, planted)) - Fraction(rng.randint(1, 4))
    A.append(row)
    b.append(rhs)
    order = list(range(len(A)))
    rng.shuffle(order)
    A, b = [A[i] for i in order], [b[i] for i in order]
    lo = [x - 5 for x in planted]
    hi = [x + 5 for x in planted]
    return IntervalLinearSystem.exact(A, b, lo, hi)


@pytest.fixture(scope="module")
def infeasible_results():
    rng = random.Random(20261019)
    out = []
    for _ in range(200):
        s = infeasible_system(rng)
        assert not fm_feasible(s.A_lo, s.b_hi, s.x_lo, s.x_hi)
        out.append((s, refute(s)))
    return out


def test_infeasible_refuted_through_solver(infeasible_results):
    refuted = sum(r.refuted for _, r in infeasible_results)
    assert refuted >= 190
    assert all(r.verdict in (Verdict.REFUTED, Verdict.NOT_REFUTED) for _, r in infeasible_results)


def test_solver_on_feasible_systems(rng):
    for _ in range(20):
        planted = [Fraction(rng.randint(-4, 4)) for _ in range(3)]
        A, b = random_system(rng, 4, 3, planted)
        s = IntervalLinearSystem.exact(A, b, [x - 1 for x in planted], [x + 1 for x in planted])
        assert fm_feasible(A, b, s.x_lo, s.x_hi)
        assert refute(s).verdict is Verdict.NOT_REFUTED


def test_scale_invariance(infeasible_results, rng):
    for s, r in infeasible_results[:50]:
        if not r.refuted:
            continue
        y = parse_certificate(refute_text(s), s).y
        for k in (Fraction(1, 1000), Fraction(7, 3), Fraction(10**9)):
            assert check_certificate(s, [k * v for v in y]).verdict is check_certificate(s, y).verdict


def refute_text(s) -> str:
    from rigorkit.lp import solve_external

    cert = solve_external(s)
    return "(" + ", ".join(str(float(v)) for v in cert.y) + ")"


def widen(s: IntervalLinearSystem, eps: Fraction) -> IntervalLinearSystem:
    return IntervalLinearSystem(
        s.variables, s.rows,
        tuple(tuple(a - eps for a in row) for row in s.A_lo),
        tuple(tuple(a + eps for a in row) for row in s.A_hi),
        s.b_hi, s.x_lo, s.x_hi,
    )


def test_widening_monotone(infeasible_results):
    from rigorkit.lp import solve_external

    for s, r in infeasible_results[:60]:
        y = solve_external(s).y
        verdicts = [check_certificate(widen(s, Fraction(k, 64)), y).refuted for k in range(0, 40, 3)]
        # once lost, refutation never comes back as the intervals grow
        assert verdicts == sorted(verdicts, reverse=True)


# -- bridge ----------------------------------------------------------------------


def test_emit_two_by_one():
    s = IntervalLinearSystem.exact([[1], [-1]], [1, -2], [0], [3])
    text = emit_lp(s)
    body = text.split("Subject To\n")[1].split("Bounds\n")
    assert len(body[0].strip().splitlines()) == 2
    assert body[1].strip().splitlines() == ["0.0 <= x1 <= 3.0", "End"]


def test_parse_vector():
    assert parse_certificate("(1.0, 1.0)").y == (1, 1)


def test_parse_clamps_noise():
    assert parse_certificate("(1.0, -1e-9)").y == (1, 0)
    with pytest.raises(BridgeError):
        parse_certificate("(1.0, -0.5)")
    with pytest.raises(BridgeError):
        parse_certificate("status optimal\n")
    with pytest.raises(BridgeError):
        parse_certificate("(1.0, nope)")


def test_parse_named_rows():
    s = IntervalLinearSystem.exact([[1], [-1]], [1, -2], [0], [3])
    assert parse_certificate("status infeasible\ny r2 0.5\ny r1 0.5\n", s).y == (Fraction(1, 2), Fraction(1, 2))
    with pytest.raises(BridgeError):
        parse_certificate("(1.0, 1.0, 1.0)", s)


def test_bad_solver_is_not_refuted():
    s = IntervalLinearSystem.exact([[1], [-1]], [1, -2], [0], [3])
    assert refute(s, solver="/nonexistent/solver").verdict is Verdict.NOT_REFUTED


def test_rationalized_duals_are_rational():
    s = IntervalLinearSystem.exact([[1], [-1]], [1, -2], [0], [3])
    y = parse_certificate("(0.3333333333333333, 0.3333333333333333)").y
    assert y == (Fraction(1, 3), Fraction(1, 3))
    assert check_certificate(s, y).verdict is Verdict.REFUTED


@given(st.lists(st.fractions(min_value=0, max_value=100, max_denominator=20), min_size=2, max_size=2))
@settings(max_examples=200)
def test_any_multipliers_sound_on_feasible(y):
    s = IntervalLinearSystem.exact([[1], [-1]], [1, 0], [-2], [2])
    assert not check_certificate(s, y).refuted
