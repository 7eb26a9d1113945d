import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.integrate import quad

from quadpie.benchmarks import fixture_kernels
from quadpie.pialgebra import (
    UNIT,
    Interval,
    PIOp,
    add_scale,
    adjoint,
    apply,
    compose,
    identity,
    inner,
    multiplier,
    norm_bound,
    sup_abs,
)
from quadpie.polykernel import Poly
from quadpie.simulate import gauss_legendre, op_matrix
from strategies import pi_ops, polys, small_rationals

P = Poly.from_text
BURGERS = fixture_kernels()["burgers"]
T, R = BURGERS["T"], BURGERS["R1"]


def test_interval():
    assert Interval.of((0, 1)) == UNIT
    with pytest.raises(ValueError):
        Interval(1, 1)
    with pytest.raises(ValueError):
        Interval.of((2, "1/2"))


def test_apply_examples():
    v = P("3*s^2 - s + 2")
    assert apply(identity(), v) == v
    assert apply(T, Poly.one()) == P("s*(s-1)/2")
    assert apply(R, Poly.one()) == P("s - 1/2")
    assert apply(multiplier(P("s+1")), v) == P("s+1") * v


def test_apply_matches_quadrature():
    s0 = 0.37
    got = float(apply(T, Poly.one()).eval({"s": Fraction(37, 100)}))
    lo, _ = quad(lambda th: (s0 - 1) * th, 0, s0)
    hi, _ = quad(lambda th: s0 * (th - 1), s0, 1)
    assert got == pytest.approx(lo + hi, abs=1e-14)


def test_apply_rejects_bad_input():
    with pytest.raises(ValueError):
        apply(T, P("th"))
    with pytest.raises(ValueError):
        apply(T, (Poly.one(), Poly.one()))


def test_compose_units_and_errors():
    assert compose(identity(), T) == T
    assert compose(T, identity()) == T
    with pytest.raises(ValueError):
        compose(T, identity(2))
    with pytest.raises(ValueError):
        compose(T, PIOp(1, 0, 0, (0, 2)))


def test_multiplier_and_add_scale():
    c = P("s^2 - 1")
    assert adjoint(multiplier(c)) == multiplier(c)
    assert add_scale(T, R, 0) == T
    assert T + R - R == T
    assert (T.scale(2) - T) == T
    A = compose(multiplier(P("2*s")), T)
    v = P("s^3")
    assert apply(A, v) == P("2*s") * apply(T, v)


def test_burgers_identities():
    assert adjoint(T) == T
    assert -compose(adjoint(R), R) == T


def test_norm_bound_examples():
    assert norm_bound(identity()) == pytest.approx(1.0, abs=1e-14)
    assert norm_bound(multiplier(P("s"))) == pytest.approx(1.0, abs=1e-14)
    assert norm_bound(identity()) >= 1.0


def test_norm_bound_dominates_power_iteration():
    x, w = gauss_legendre(200, 0.0, 1.0)
    M = op_matrix(T, x)
    sw = np.sqrt(w)
    S = sw[:, None] * M / sw[None, :]
    true = np.linalg.norm(S, 2)
    assert norm_bound(T) >= true
    assert norm_bound(T) < 3 * true  # not absurdly loose


def test_sup_abs():
    assert sup_abs(P("s*(1-s)")) == pytest.approx(0.25, abs=1e-12)
    assert sup_abs(P("s*(1-s)")) >= 0.25
    assert sup_abs(P("-3"), (0, 2)) == pytest.approx(3.0)
    p = P("16*s^4 - 20*s^2*2 + 5")  # interior extrema on [-1, 1]
    xs = np.linspace(-1, 1, 200001)
    assert sup_abs(p, (-1, 1)) >= np.max(np.abs(p.eval_float(s=xs)))
    with pytest.raises(ValueError):
        sup_abs(P("s*th"))


def test_json_round_trip():
    op = PIOp(P("s^2 + 1/3"), P("s*th - 2"), P("th^3"), (Fraction(-1, 2), 2))
    data = json.loads(json.dumps(op.to_json()))
    assert PIOp.from_json(data) == op
    data["dims"] = [2, 1]
    with pytest.raises(ValueError):
        PIOp.from_json(data)


def test_matrix_valued_operators():
    Z = PIOp.vstack([identity(), T, R])
    assert Z.dims == (3, 1)
    v = P("s^2")
    assert apply(Z, v) == (v, apply(T, v), apply(R, v))
    G = compose(adjoint(Z), Z)
    assert G.dims == (1, 1)
    assert inner(v, apply(G, v)) == inner(apply(Z, v), apply(Z, v))


@given(pi_ops(3), pi_ops(3), polys(1, 3))
def test_compose_matches_apply(A, B, v):
    assert apply(compose(A, B), v) == apply(A, apply(B, v))


@settings(max_examples=20)
@given(pi_ops(2), pi_ops(2), pi_ops(2))
def test_compose_associative(A, B, C):
    assert compose(A, compose(B, C)) == compose(compose(A, B), C)


@given(pi_ops(3), pi_ops(3))
def test_adjoint_antihomomorphism(A, B):
    assert adjoint(compose(A, B)) == compose(adjoint(B), adjoint(A))
    assert adjoint(adjoint(A)) == A


@given(pi_ops(3), polys(1, 3), polys(1, 3))
def test_adjoint_inner_product(op, u, v):
    assert inner(u, apply(op, v)) == inner(apply(adjoint(op), u), v)


@given(pi_ops(3, multiplier=False), pi_ops(3, multiplier=False))
def test_two_pi_closure(A, B):
    assert compose(A, B).is_2pi


@given(pi_ops(2), pi_ops(2), small_rationals, polys(1, 3))
def test_add_scale_linear(A, B, lam, v):
    assert apply(add_scale(A, B, lam), v) == apply(A, v) + apply(B, v).scale(lam)


@settings(max_examples=25)
@given(pi_ops(2), polys(1, 3))
def test_norm_bound_dominates_rayleigh(op, v):
    if v.is_zero():
        return
    q = abs(inner(v, apply(op, v))) / inner(v, v)
    assert norm_bound(op) >= float(q) * (1 - 1e-12)
