import json
from fractions import Fraction

import pytest
from hypothesis import given, settings

from quadpie.benchmarks import fixture_kernels
from quadpie.pialgebra import PIOp, apply, identity, inner
from quadpie.polykernel import Poly
from quadpie.tensorpi import (
    NoWitness,
    SimplexFunctional,
    TensorPIOp,
    apply_tensor,
    compose_3pi_tensor,
    cubic_form,
    klin,
    klin_apply,
    scaling_witness,
    tensor_product,
    tensor_state,
)
from strategies import pi_ops, polys, small_rationals, tensor_ops

P = Poly.from_text
FX = fixture_kernels()
T, R = FX["burgers"]["T"], FX["burgers"]["R1"]


def test_tensor_state():
    assert tensor_state(P("s + 1")) == P("(th + 1)*(et + 1)")


def test_tensor_product_rejects_multipliers():
    with pytest.raises(ValueError):
        tensor_product(identity(), T)
    with pytest.raises(ValueError):
        tensor_product(T, PIOp(0, 1, 1, (0, 2)))


def test_burgers_b_kernels():
    B = -tensor_product(T, R)
    assert B.B1 == P("-2*(s-1)*th*et")
    assert B.B2 == -(P("s*(th-1)*et") + P("(s-1)*et*(th-1)"))
    assert B.B3 == P("-2*s*(th-1)*(et-1)")


def test_klin_examples():
    G = TensorPIOp(1, 0, 0)
    # int over et <= th <= s of 1 equals 1/6
    assert klin_apply(klin(G), Poly.one()) == pytest.approx(1 / 6)
    # all-ones kernels integrate 1 over {et <= th} x [0, 1]
    assert klin_apply(klin(TensorPIOp(1, 1, 1)), Poly.one()) == Fraction(1, 2)
    assert klin_apply(klin(TensorPIOp.zero()), P("s")) == 0


def test_json_round_trip():
    B = TensorPIOp(P("s*th - et"), P("1/3"), P("et^2"), (0, 2))
    assert TensorPIOp.from_json(json.loads(json.dumps(B.to_json()))) == B
    K = klin(B)
    assert SimplexFunctional.from_json(json.loads(json.dumps(K.to_json()))) == K
    with pytest.raises(ValueError):
        TensorPIOp(P("ze"), 0, 0)


def test_scaling_witness_examples():
    Q = identity().scale(-1)
    G = TensorPIOp(P("s"), 0, 0)
    vh = scaling_witness(Q, G, Poly.one())
    assert inner(vh, apply(Q, vh)) + 2 * cubic_form(G, vh) > 0
    with pytest.raises(NoWitness):
        scaling_witness(Q, TensorPIOp.zero(), Poly.one())


@given(pi_ops(2, multiplier=False), pi_ops(2, multiplier=False), polys(1, 2))
def test_tensor_product_identity(A, B, v):
    assert apply_tensor(tensor_product(A, B), tensor_state(v)) == apply(A, v) * apply(B, v)


@settings(max_examples=25)
@given(pi_ops(2), tensor_ops(2), polys(1, 2))
def test_compose_with_tensor(Q, B, v):
    w = tensor_state(v)
    assert apply_tensor(compose_3pi_tensor(Q, B), w) == apply(Q, apply_tensor(B, w))


@settings(max_examples=25)
@given(tensor_ops(2), polys(1, 2))
def test_klin_matches_cubic_form(G, v):
    assert klin_apply(klin(G), v) == cubic_form(G, v)


@given(tensor_ops(2), tensor_ops(2), small_rationals)
def test_klin_linear(G, H, c):
    assert klin(G + H.scale(c)).K == klin(G).K + klin(H).K.scale(c)


@settings(max_examples=25)
@given(pi_ops(2, multiplier=False), polys(1, 2))
def test_tensor_product_symmetric_on_diagonal(A, v):
    # swapping th and et leaves B[v (x) v] unchanged because v (x) v is symmetric
    B = tensor_product(A, T)
    C = tensor_product(T, A)
    w = tensor_state(v)
    assert apply_tensor(B, w) == apply_tensor(C, w)


@settings(max_examples=25)
@given(pi_ops(2), tensor_ops(2), polys(1, 2))
def test_scaling_witness_property(Q, G, v):
    c = cubic_form(G, v)
    if c == 0:
        with pytest.raises(NoWitness):
            scaling_witness(Q, G, v)
        return
    vh = scaling_witness(Q, G, v)
    assert inner(vh, apply(Q, vh)) + 2 * cubic_form(G, vh) > 0
