"""Exact oracle checks run by ``quadpie selftest``.

Each check draws random polynomial operators and test functions with a seeded
generator and compares two independent exact computations.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .benchmarks import fixture_check, fixture_kernels
from .pialgebra import PIOp, adjoint, apply, compose
from .polykernel import Poly
from .tensorpi import (
    TensorPIOp,
    apply_tensor,
    compose_3pi_tensor,
    cubic_form,
    klin,
    klin_apply,
    tensor_product,
    tensor_state,
)

__all__ = ["random_poly", "random_op", "random_tensor", "Check", "run_selftest"]


def random_poly(rng: random.Random, nvars: int, degree: int, density: float = 0.6) -> Poly:
    """Random polynomial in the first ``nvars`` variables with small rational coefficients."""
    terms = {}

    def walk(prefix, left):
        if len(prefix) == nvars:
            if rng.random() < density:
                terms[tuple(prefix) + (0,) * (4 - nvars)] = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
            return
        for e in range(left + 1):
            walk(prefix + [e], left - e)

    walk([], degree)
    return Poly(terms)


def random_op(rng: random.Random, degree: int = 3, multiplier: bool = True) -> PIOp:
    r0 = random_poly(rng, 1, degree) if multiplier else 0
    return PIOp(r0, random_poly(rng, 2, degree), random_poly(rng, 2, degree))


def random_tensor(rng: random.Random, degree: int = 3) -> TensorPIOp:
    return TensorPIOp(*(random_poly(rng, 3, degree, 0.3) for _ in range(3)))


@dataclass
class Check:
    name: str
    instances: int
    failures: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures


def _timed(name, count, body) -> Check:
    chk = Check(name, count)
    t0 = time.perf_counter()
    for k in range(count):
        msg = body(k)
        if msg:
            chk.failures.append(f"instance {k}: {msg}")
    chk.seconds = time.perf_counter() - t0
    return chk


def run_selftest(instances: int = 20, seed: int = 0) -> list[Check]:
    rng = random.Random(seed)

    def tensor_identity(_):
        T, R = random_op(rng, 3, False), random_op(rng, 3, False)
        v = random_poly(rng, 1, 4)
        lhs = apply(T, v) * apply(R, v)
        rhs = apply_tensor(tensor_product(T, R), tensor_state(v))
        return None if lhs == rhs else "(Tv)(Rv) differs from (T x R)[v x v]"

    def composition(_):
        Q, B = random_op(rng, 3), random_tensor(rng, 3)
        w = tensor_state(random_poly(rng, 1, 4))
        lhs = apply(Q, apply_tensor(B, w))
        rhs = apply_tensor(compose_3pi_tensor(Q, B), w)
        return None if lhs == rhs else "Q(B w) differs from (Q o B) w"

    def linearization(_):
        G = random_tensor(rng, 3)
        v = random_poly(rng, 1, 4)
        lhs, rhs = cubic_form(G, v), klin_apply(klin(G), v)
        return None if lhs == rhs else f"<v, G[v x v]> = {lhs} but K_lin gives {rhs}"

    def pi_composition(_):
        A, B = random_op(rng, 2), random_op(rng, 2)
        v = random_poly(rng, 1, 3)
        return None if apply(compose(A, B), v) == apply(A, apply(B, v)) else "(AB)v != A(Bv)"

    def burgers(_):
        fx = fixture_kernels()["burgers"]
        T, R = fx["T"], fx["R1"]
        if adjoint(T) != T:
            return "T is not self-adjoint"
        if -compose(adjoint(R), R) != T:
            return "T != -R* R"
        if not klin(compose_3pi_tensor(adjoint(T), tensor_product(T, R))).is_zero():
            return "K_lin(T* (T x R)) is not zero"
        return None

    def fixtures(_):
        rep = fixture_check()
        return "; ".join(rep.mismatches) or None

    return [
        _timed("tensor product identity", instances, tensor_identity),
        _timed("3-PI o tensor composition", instances, composition),
        _timed("cubic form linearization", instances, linearization),
        _timed("PI composition", instances, pi_composition),
        _timed("Burgers structural identities", 1, burgers),
        _timed("reference kernel fixtures", 1, fixtures),
    ]
