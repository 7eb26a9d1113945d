from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from quadpie.polykernel import ET, S, TH, ZE, Poly, Var, arith, evaluate, integrate, permute, substitute
from strategies import points, polys, small_rationals

P = Poly.from_text


def test_arith_examples():
    assert arith(P("s"), P("th"), "add") == P("s + th")
    assert arith(P("s - 1"), P("th"), "mul") == P("s*th - th")
    assert arith(P("1/2*(s-th)^2"), 2, "scale") == P("(s-th)^2")
    assert arith(P("s"), P("s"), "sub").is_zero()
    with pytest.raises(ValueError):
        arith(P("s"), P("s"), "div")


def test_integrate_examples():
    assert integrate(P("th"), TH, 0, S) == P("s^2/2")
    assert integrate(P("(s-th)^2"), TH, S, 1) == P("(1-s)^3/3")
    assert integrate(P("ze*th"), ZE, ET, TH) == P("th*(th^2 - et^2)/2")


def test_integrate_matches_quadrature():
    p = P("ze*th")
    got = integrate(p, ZE, ET, TH)
    for th, et in [(0.3, 0.1), (0.9, 0.2), (0.5, 0.45), (0.7, 0.0), (1.0, 0.3)]:
        ref, _ = quad(lambda z: z * th, et, th)
        assert float(got.eval({TH: th, ET: et})) == pytest.approx(ref, abs=1e-14)


def test_integrate_rejects_polynomial_limits():
    with pytest.raises(ValueError):
        integrate(P("th"), TH, 0, P("s^2"))
    with pytest.raises(ValueError):
        integrate(P("th"), TH, 0, P("s + et"))
    with pytest.raises(ValueError):
        integrate(P("th"), TH, 0, TH)


def test_substitute_and_permute_examples():
    assert substitute(P("s*th"), S, ET) == P("et*th")
    assert permute(P("s^2*et"), {S: TH, TH: S}) == P("th^2*et")
    assert permute(P("s*th - et"), {S: ET, TH: S, ET: TH}) == P("et*s - th")
    assert substitute(P("s^2 + s"), S, P("th + 1")) == P("th^2 + 3*th + 2")
    assert substitute(P("s^2*th"), S, Fraction(1, 2)) == P("th/4")


def test_eval_examples():
    pt = {S: Fraction(1, 2), TH: Fraction(4, 5)}
    assert evaluate(P("th*(s-1)"), pt) == Fraction(-2, 5)
    assert evaluate(P("1/2*(s-1)^2*th^2"), pt) == Fraction(2, 25)
    assert evaluate(Poly.zero(), {}) == 0
    with pytest.raises(ValueError, match="th"):
        evaluate(P("s*th"), {S: 1})


def test_var_names_and_aliases():
    assert Poly.var("theta") == Poly.var(Var.TH) == Poly.var("θ")
    assert P("eta*zeta") == Poly.monomial((0, 0, 1, 1))


def test_text_form():
    p = P("1/2*s^2*th^2 - s*th^2 + 1/2*th^2")
    assert p.to_text() == "1/2 * s^2 th^2 - 1 * s^1 th^2 + 1/2 * th^2"
    assert P(p.to_text()) == p
    assert P("0") == Poly.zero() and Poly.zero().to_text() == "0"
    with pytest.raises(ValueError):
        P("s + * th")
    with pytest.raises(ValueError):
        P("x^2")


def test_float_evaluation_matches_exact():
    p = P("3/7*s^3*th - 2*th^2 + 5")
    x, y = np.array([0.1, 0.6]), np.array([0.9, 0.25])
    ref = [float(p.eval({S: Fraction(a).limit_denominator(100), TH: Fraction(b).limit_denominator(100)})) for a, b in zip(x, y)]
    assert np.allclose(p.eval_float(s=x, th=y), ref, rtol=1e-14)


@given(polys(3), polys(3), polys(3))
def test_ring_laws(p, q, r):
    assert p + q == q + p
    assert p * q == q * p
    assert (p + q) + r == p + (q + r)
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r
    assert p - p == Poly.zero()


@given(polys(2, 4), st.sampled_from([S, TH]))
def test_fundamental_theorem(p, v):
    other = TH if v == S else S
    lhs = integrate(p.partial(v), v, 0, other)
    rhs = p.substitute(v, other) - p.substitute(v, 0)
    assert lhs == rhs


@given(polys(2, 4))
def test_fubini_on_simplex(F):
    # F(th, et) with th, et over the triangle; rename to the identity's variables
    F = F.permute({S: TH, TH: ET})
    lhs = F.integrate(ET, TH, S).integrate(TH, 0, S)
    rhs = F.permute({TH: ET, ET: TH}).integrate(ET, 0, TH).integrate(TH, 0, S)
    assert lhs == rhs


@given(polys(2), polys(2), points, points, small_rationals)
def test_eval_commutes(p, q, a, b, c):
    pt = {S: a, TH: b}
    assert (p + q).eval(pt) == p.eval(pt) + q.eval(pt)
    assert (p * q).eval(pt) == p.eval(pt) * q.eval(pt)
    assert p.scale(c).eval(pt) == c * p.eval(pt)
    assert p.substitute(S, TH).eval({TH: b}) == p.eval({S: b, TH: b})


@given(polys(3, 4))
def test_text_round_trip(p):
    assert P(p.to_text()) == p


@given(polys(3))
def test_permutation_is_invertible(p):
    cyc = {S: ET, TH: S, ET: TH}
    inv = {ET: S, S: TH, TH: ET}
    assert p.permute(cyc).permute(inv) == p
