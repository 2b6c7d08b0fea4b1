"""Expression kernel: differentiation, simplification, zero testing."""

import math

import pytest
from hypothesis import given, settings, strategies as st

import formflow.expr as ex
from corpus import CHART, random_poly_scalar, random_smooth_scalar, random_point, rng
from oracles import poly_add, poly_diff, poly_from_expr, poly_is_zero, poly_mul

X, Y, Z, T = (ex.coord(i) for i in range(4))


def make_tester(seed: int = 20180425) -> ex.ZeroTester:
    return ex.ZeroTester(ex.default_box(4), seed=seed)


def test_difference_of_squares_is_zero():
    # (x^2 - y^2) - (x - y)(x + y): zero in the polynomial ring even though
    # the simplifier leaves the product unexpanded.
    lhs = ex.add(ex.power(X, 2), ex.negate(ex.power(Y, 2)))
    rhs = ex.mul(ex.add(X, ex.negate(Y)), ex.add(X, Y))
    diff = ex.simplify(ex.add(lhs, ex.negate(rhs)))
    p = poly_from_expr(diff, 4)
    assert p is not None and poly_is_zero(p)
    assert make_tester().test(diff).zero


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_product_rule_matches_polynomial_oracle(seed):
    r = rng(seed)
    f = random_poly_scalar(r)
    g = random_poly_scalar(r)
    i = int(r.integers(0, 4))
    lib = poly_from_expr(ex.differentiate(ex.mul(f, g), i), 4)
    pf, pg = poly_from_expr(f, 4), poly_from_expr(g, 4)
    want = poly_add(poly_mul(poly_diff(pf, i), pg), poly_mul(pf, poly_diff(pg, i)))
    assert poly_is_zero(poly_add(lib, {k: -v for k, v in want.items()}), tol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_mixed_partials_commute(seed):
    # the C2 hypothesis behind transport commuting with d
    r = rng(seed)
    e = random_smooth_scalar(r)
    i, j = (int(v) for v in r.integers(0, 4, size=2))
    gap = ex.simplify(
        ex.add(
            ex.differentiate(ex.differentiate(e, i), j),
            ex.negate(ex.differentiate(ex.differentiate(e, j), i)),
        )
    )
    assert make_tester().test(gap).zero


def test_chain_rule_on_trig():
    e = ex.sin(ex.mul(ex.Const(2), X))
    d = ex.differentiate(e, 0)
    p = random_point(rng(3))
    assert ex.eval_at(d, p) == pytest.approx(2 * math.cos(2 * p[0]), rel=1e-12)


def test_quotient_rule_numerically():
    e = ex.quotient(ex.add(X, ex.ONE), ex.add(ex.power(Y, 2), ex.Const(2)))
    d = ex.differentiate(e, 1)
    p = (0.3, 0.5, 0.0, 0.0)
    h = 1e-6
    up = ex.eval_at(e, (0.3, 0.5 + h, 0.0, 0.0))
    dn = ex.eval_at(e, (0.3, 0.5 - h, 0.0, 0.0))
    assert ex.eval_at(d, p) == pytest.approx((up - dn) / (2 * h), rel=1e-8)


def test_simplify_constant_folding():
    e = ex.add(ex.mul(ex.Const(2), ex.Const(3)), ex.Const(-6))
    assert ex.is_syntactic_zero(ex.simplify(e))
    assert ex.simplify(ex.mul(ex.ZERO, X)) == ex.ZERO
    assert ex.simplify(ex.power(X, 0)) == ex.ONE


def test_like_term_collection():
    e = ex.add(X, X, ex.mul(ex.Const(-2), X))
    assert ex.is_syntactic_zero(ex.simplify(e))


def test_zero_tester_finds_witness():
    e = ex.mul(X, Y)  # vanishes on the axes, not almost everywhere
    verdict = make_tester().test(e)
    assert not verdict.zero
    assert verdict.witness is not None
    assert abs(ex.eval_at(e, verdict.witness)) > 0


def test_zero_tester_deterministic():
    e = ex.add(ex.sin(X), ex.negate(X))
    a = make_tester(seed=7).test(e)
    b = make_tester(seed=7).test(e)
    assert (a.zero, a.witness, a.samples) == (b.zero, b.witness, b.samples)


def test_zero_tester_accepts_pythagorean_identity():
    # sin^2 + cos^2 - 1 never simplifies syntactically (rewrite is off) but
    # must still test zero.
    e = ex.add(
        ex.power(ex.sin(X), 2), ex.power(ex.cos(X), 2), ex.Const(-1)
    )
    assert not ex.is_syntactic_zero(ex.simplify(e))
    assert make_tester().test(e).zero


def test_guarded_sampling_skips_singular_region():
    r2 = ex.add(ex.power(X, 2), ex.power(Y, 2))
    box = ex.Box(
        lows=(-1.0,) * 4, highs=(1.0,) * 4, guards=(r2,)
    )
    e = ex.quotient(ex.ONE, r2)
    verdict = ex.ZeroTester(box).test(e)
    assert not verdict.zero


def test_eval_at_raises_on_division_by_zero():
    e = ex.quotient(ex.ONE, X)
    with pytest.raises(ex.EvalError):
        ex.eval_at(e, (0.0, 0.0, 0.0, 0.0))


def test_eval_with_params():
    e = ex.mul(ex.param("a"), X)
    assert ex.eval_at(e, (2.0, 0, 0, 0), {"a": 3.0}) == pytest.approx(6.0)
    with pytest.raises(ex.EvalError):
        ex.eval_at(e, (2.0, 0, 0, 0))


def test_collect_params():
    e = ex.add(ex.param("b"), ex.mul(ex.param("a"), ex.sin(ex.param("b"))))
    assert ex.collect_params(e) == ("a", "b")


def test_box_validation():
    with pytest.raises(ex.ExprError):
        ex.Box(lows=(0.0, 0.0), highs=(1.0,))
    with pytest.raises(ex.ExprError):
        ex.Box(lows=(1.0,), highs=(0.0,))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_simplify_preserves_value(seed):
    r = rng(seed)
    e = random_smooth_scalar(r)
    s = ex.simplify(e)
    for _ in range(4):
        p = random_point(r)
        assert ex.eval_at(s, p) == pytest.approx(ex.eval_at(e, p), rel=1e-10, abs=1e-10)
