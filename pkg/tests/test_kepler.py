from fractions import Fraction

import pytest

from oracles import a0_direct, cayley_menger_delta, surrogate_polynomial
from rigorkit.expr import Box, eval_exact, eval_interval, to_poly
from rigorkit.kepler import (
    A_PERMUTATIONS,
    KEPLER_BOX,
    ApproxName,
    a_expr,
    a_poly,
    approximation,
    build_gamma,
    build_p,
    build_surrogate_g,
    default_domain,
    delta_expr,
    delta_poly,
    geometric_function,
    p_expr,
    sym_constant,
    validate_approximation,
)
from rigorkit.numeric import ConstantName, Interval, enclose_constant

CORNER = [2] * 6


@pytest.fixture(scope="module")
def g():
    return build_surrogate_g()


@pytest.fixture(scope="module")
def p(g):
    return build_p(g)


def random_point(rng, den=100):
    return [Fraction(rng.randint(200, 251), 100) if den == 100 else Fraction(rng.randint(2 * den, 251 * den // 100), den) for _ in range(6)]


def test_delta_against_determinant(rng):
    d = delta_poly()
    assert d.eval_exact(CORNER) == 128 == cayley_menger_delta(CORNER)
    for _ in range(30):
        pt = random_point(rng, 997)
        assert d.eval_exact(pt) == cayley_menger_delta(pt)


def test_delta_shape():
    d = delta_poly()
    assert max(d.degrees()) <= 4
    assert eval_interval(delta_expr(), Box([(2, 2)] * 6)).lo_q == 128


def test_a0_against_formula(rng):
    assert a_poly("A0").eval_exact(CORNER) == 20 == a0_direct(CORNER)
    for _ in range(100):
        pt = random_point(rng, 997)
        assert a_poly("A0").eval_exact(pt) == a0_direct(pt)


def test_a_permutations(rng):
    expected_order = {"A1": (1, 5, 6, 4, 2, 3), "A2": (2, 4, 6, 5, 1, 3), "A3": (4, 5, 3, 1, 2, 6)}
    for name, order in expected_order.items():
        assert A_PERMUTATIONS[name] == tuple(i - 1 for i in order)
        for _ in range(50):
            pt = random_point(rng, 997)
            expected = a0_direct([pt[i - 1] for i in order])
            assert a_poly(name).eval_exact(pt) == expected
            assert eval_exact(a_expr(name), pt) == expected
        assert a_poly(name).eval_exact(CORNER) == a_poly("A0").eval_exact(CORNER)


def test_geometric_functions_consistent():
    for name in ("DELTA", "A0", "A1", "A2", "A3"):
        f = geometric_function(name)
        assert to_poly(f.expr, 6) == f.poly


def test_approximation_bodies():
    t = Fraction(7, 3)
    rcp = approximation(ApproxName.RCP_UPPER).body.rational_part()
    expected = Fraction(1, 4) - 37 * t / 1600 + t**2 / 1000 - 13 * t**3 / 640000 + t**4 / 6400000
    assert rcp.eval_exact([t]) == expected
    s2 = sym_constant(ConstantName.SQRT2)
    up = approximation(ApproxName.SQRT_UPPER).body.eval_at([t])
    # 8 sqrt2 + (t - 128) / (16 sqrt2)
    assert up == s2 * 8 + s2 * ((t - 128) / 32)
    at = approximation(ApproxName.ATAN_UPPER).body.eval_at([t])
    assert at == sym_constant(ConstantName.ATAN_SQRT2_OVER_5) + (s2 * Fraction(-1, 5) + t) * Fraction(25, 27)
    lo = approximation(ApproxName.SQRT_LOWER).body.eval_at([t]).enclose(128)
    pi, a = enclose_constant("PI", 128), enclose_constant("ATAN_SQRT2_OVER_5", 128)
    ref = enclose_constant("SQRT2", 128) * 8 + (t - 128) * 3 / (64 * (pi - a * 4))
    assert lo.intersects(ref)


def test_sqrt_lower_anchor():
    assert approximation(ApproxName.SQRT_LOWER).body.eval_at([128]) == sym_constant(ConstantName.SQRT2) * 8


@pytest.mark.parametrize("name", list(ApproxName))
def test_validate(name):
    r = validate_approximation(name)
    assert r.proven, r
    dom, reconstructed = default_domain(name)
    if name in (ApproxName.SQRT_LOWER, ApproxName.SQRT_UPPER):
        assert (dom.lo_q, dom.hi_q) == (128, 501) and not reconstructed
    else:
        assert reconstructed
    assert r.detail["reconstructed"] == reconstructed


def test_rcp_domain_covers_a_range():
    dom, _ = default_domain(ApproxName.RCP_UPPER)
    assert dom.lo_q <= 20 <= dom.hi_q
    assert dom.lo_q > 0


def test_invalid_domain_rejected():
    # the secant-style lower bound is positive at 0 where sqrt vanishes
    a = approximation(ApproxName.SQRT_LOWER)
    assert not validate_approximation(a.with_domain(Interval(0, 501), False)).proven
    # a tangent to a concave function stays above it everywhere
    up = approximation(ApproxName.SQRT_UPPER)
    assert validate_approximation(up.with_domain(Interval(0, 501), False)).proven


def test_p_is_rational(g):
    full = sym_constant(ConstantName.SQRT2, 6) * (g - sym_constant(ConstantName.PT, 6))
    assert full.is_rational()


def test_p_matches_independent_construction(p):
    ref, exact = surrogate_polynomial()
    assert exact and ref is not None
    assert p.terms == ref


def test_displayed_weights_give_irrational_p():
    ref, _ = surrogate_polynomial(delta_oct_divisor=6, halve_argument=False)
    assert ref is None


def test_p_structure(p):
    assert p.total_degree() == 18
    # frozen from the sympy construction above
    assert p.monomial_count() == 12939


def test_p_compact_form(p):
    assert to_poly(p_expr(), 6) == p


def test_corner_identity(g, p):
    assert p.eval_exact(CORNER) == 0
    assert g.eval_at(CORNER) == sym_constant(ConstantName.PT)
    q = p.affine_reparam(list(KEPLER_BOX))
    assert q.constant_term() == 0


def test_gamma_at_corner():
    iv = eval_interval(build_gamma(), Box([(2, 2)] * 6), 64)
    assert iv.intersects(enclose_constant(ConstantName.PT, 64))
    assert iv.width() < Fraction(1, 10**6)


def test_sandwich(rng, g, p):
    # g = p / sqrt2 + pt, checked against the symbolic g on a few points
    gamma = build_gamma()
    s2 = enclose_constant(ConstantName.SQRT2, 80)
    pt_iv = enclose_constant(ConstantName.PT, 80)
    for i in range(1000):
        y = random_point(rng)
        pv = p.eval_exact(y)
        assert pv <= 0
        g_iv = pt_iv + Interval.enclose(pv, prec=80) / s2
        if i < 20:
            assert g_iv.intersects(g.eval_at(y).enclose(80))
        lo = eval_interval(gamma, Box([(v, v) for v in y]), 80).lo_q
        assert lo <= g_iv.hi_q
