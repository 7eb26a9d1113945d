"""Operators on two-variable functions w(th, et) and the cubic linearization.

A :class:`TensorPIOp` with kernels ``B1, B2, B3`` (polynomials in s, th, et)
maps ``w`` to a function of s::

    (B w)(s) = int_a^s int_a^th  B1 w det dth      (et <= th <= s)
             + int_s^b int_a^s   B2 w det dth      (et <= s <= th)
             + int_s^b int_s^th  B3 w det dth      (s <= et <= th)

Only symmetric ``w`` (in practice ``v (x) v``) are meaningful inputs, which is
why the three ordered regions suffice.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .pialgebra import UNIT, Interval, PIOp, apply, inner
from .polykernel import Poly, Var, to_fraction, to_rational

__all__ = [
    "TensorPIOp",
    "SimplexFunctional",
    "NoWitness",
    "tensor_state",
    "tensor_product",
    "apply_tensor",
    "compose_3pi_tensor",
    "klin",
    "klin_apply",
    "cubic_form",
    "scaling_witness",
]

S, TH, ET, ZE = Var.S, Var.TH, Var.ET, Var.ZE
_ALLOWED = {S, TH, ET}


class NoWitness(ValueError):
    """Raised when the cubic term vanishes, so no destabilizing scaling exists."""


class TensorPIOp:
    __slots__ = ("B1", "B2", "B3", "domain")

    def __init__(self, B1, B2, B3, domain=UNIT):
        ks = []
        for k in (B1, B2, B3):
            if not isinstance(k, Poly):
                k = Poly.from_text(k) if isinstance(k, str) else Poly.const(k)
            if k.variables() - _ALLOWED:
                raise ValueError(f"tensor kernel may only use s, th, et: {k}")
            ks.append(k)
        self.B1, self.B2, self.B3 = ks
        self.domain = Interval.of(domain)

    @classmethod
    def zero(cls, domain=UNIT) -> "TensorPIOp":
        z = Poly.zero()
        return cls(z, z, z, domain)

    def kernels(self) -> tuple[Poly, Poly, Poly]:
        return self.B1, self.B2, self.B3

    def is_zero(self) -> bool:
        return not (self.B1 or self.B2 or self.B3)

    def _check(self, other: "TensorPIOp"):
        if self.domain != other.domain:
            raise ValueError("tensor operators live on different domains")

    def __add__(self, other: "TensorPIOp") -> "TensorPIOp":
        self._check(other)
        return TensorPIOp(*(x + y for x, y in zip(self.kernels(), other.kernels())), self.domain)

    def __sub__(self, other: "TensorPIOp") -> "TensorPIOp":
        return self + other.scale(-1)

    def __neg__(self) -> "TensorPIOp":
        return self.scale(-1)

    def scale(self, c) -> "TensorPIOp":
        c = to_rational(c)
        return TensorPIOp(*(x.scale(c) for x in self.kernels()), self.domain)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorPIOp):
            return NotImplemented
        return self.domain == other.domain and self.kernels() == other.kernels()

    def __hash__(self):
        return hash((self.domain, self.kernels()))

    def to_json(self) -> dict:
        return {
            "domain": self.domain.to_json(),
            "B1": self.B1.to_text(),
            "B2": self.B2.to_text(),
            "B3": self.B3.to_text(),
        }

    @classmethod
    def from_json(cls, data) -> "TensorPIOp":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(*(Poly.from_text(data[k]) for k in ("B1", "B2", "B3")), data["domain"])

    def __repr__(self) -> str:
        return f"TensorPIOp(B1={self.B1}, B2={self.B2}, B3={self.B3})"


class SimplexFunctional:
    """``w -> int_a^b int_a^s int_a^th K(s, th, et) w(s, th, et) det dth ds``."""

    __slots__ = ("K", "domain")

    def __init__(self, K, domain=UNIT):
        if not isinstance(K, Poly):
            K = Poly.from_text(K) if isinstance(K, str) else Poly.const(K)
        if K.variables() - _ALLOWED:
            raise ValueError(f"functional kernel may only use s, th, et: {K}")
        self.K = K
        self.domain = Interval.of(domain)

    def is_zero(self) -> bool:
        return self.K.is_zero()

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimplexFunctional):
            return NotImplemented
        return self.domain == other.domain and self.K == other.K

    def __hash__(self):
        return hash((self.domain, self.K))

    def to_json(self) -> dict:
        return {"domain": self.domain.to_json(), "K": self.K.to_text()}

    @classmethod
    def from_json(cls, data) -> "SimplexFunctional":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(Poly.from_text(data["K"]), data["domain"])

    def __repr__(self) -> str:
        return f"SimplexFunctional(K={self.K})"


def tensor_state(v: Poly) -> Poly:
    """``(v (x) v)(th, et) = v(th) v(et)``."""
    return v.permute({S: TH}) * v.permute({S: ET})


def tensor_product(T: PIOp, R: PIOp) -> TensorPIOp:
    """Symmetrized kernels with ``(T v)(R v) = (T (x) R)[v (x) v]``."""
    for op in (T, R):
        if not op.is_scalar:
            raise ValueError("tensor product is defined for scalar operators")
        if not op.is_2pi:
            raise ValueError("tensor product requires operators without a multiplier term")
    if T.domain != R.domain:
        raise ValueError("operators live on different domains")
    th_to_et = {TH: ET}
    T1, T2, R1, R2 = T.r1, T.r2, R.r1, R.r2
    T1e, T2e = T1.permute(th_to_et), T2.permute(th_to_et)
    R1e, R2e = R1.permute(th_to_et), R2.permute(th_to_et)
    Q1 = T1 * R1e + T1e * R1
    Q2 = T2 * R1e + T1e * R2
    Q3 = T2 * R2e + T2e * R2
    return TensorPIOp(Q1, Q2, Q3, T.domain)


def apply_tensor(B: TensorPIOp, w: Poly) -> Poly:
    """Exact action on a polynomial ``w(th, et)``."""
    if w.variables() - {TH, ET}:
        raise ValueError("tensor state must depend on th, et only")
    a, b = B.domain.a, B.domain.b
    out = Poly.zero()
    if B.B1:
        out = out + (B.B1 * w).integrate(ET, a, TH).integrate(TH, a, S)
    if B.B2:
        out = out + (B.B2 * w).integrate(ET, a, S).integrate(TH, S, b)
    if B.B3:
        out = out + (B.B3 * w).integrate(ET, S, TH).integrate(TH, S, b)
    return out


def compose_3pi_tensor(Q: PIOp, B: TensorPIOp) -> TensorPIOp:
    """Kernels G1..G3 of ``Q o B`` with ``Q`` a scalar 3-PI operator."""
    if not Q.is_scalar:
        raise ValueError("compose_3pi_tensor needs a scalar operator")
    if Q.domain != B.domain:
        raise ValueError("operators live on different domains")
    a, b = B.domain.a, B.domain.b
    Q0, Q1, Q2 = Q.r0, Q.r1.permute({TH: ZE}), Q.r2.permute({TH: ZE})
    Bz = [k.permute({S: ZE}) for k in B.kernels()]

    # R_ij(s, ze, th, et) = Q_i(s, ze) B_j(ze, th, et)
    R = {}
    for i, q in ((1, Q1), (2, Q2)):
        for j, bj in enumerate(Bz, start=1):
            R[i, j] = q * bj if q and bj else Poly.zero()

    def I(i, j, lo, hi):
        p = R[i, j]
        return p.integrate(ZE, lo, hi) if p else p

    G1 = Q0 * B.B1 + I(1, 3, a, ET) + I(1, 2, ET, TH) + I(1, 1, TH, S) + I(2, 1, S, b)
    G2 = Q0 * B.B2 + I(1, 3, a, ET) + I(1, 2, ET, S) + I(2, 2, S, TH) + I(2, 1, TH, b)
    G3 = Q0 * B.B3 + I(1, 3, a, S) + I(2, 3, S, ET) + I(2, 2, ET, TH) + I(2, 1, TH, b)
    return TensorPIOp(G1, G2, G3, B.domain)


def klin(G: TensorPIOp) -> SimplexFunctional:
    """Kernel K on et <= th <= s with ``<v, G[v (x) v]> = K[v (x) v (x) v]``."""
    K = (
        G.B1
        + G.B2.permute({S: TH, TH: S})
        + G.B3.permute({S: ET, TH: S, ET: TH})
    )
    return SimplexFunctional(K, G.domain)


def klin_apply(K: SimplexFunctional, v: Poly) -> Fraction:
    """Exact value of the functional on ``v (x) v (x) v``."""
    a, b = K.domain.a, K.domain.b
    if not K.K:
        return Fraction(0)
    w = v * v.permute({S: TH}) * v.permute({S: ET})
    val = (K.K * w).integrate(ET, a, TH).integrate(TH, a, S).integrate(S, a, b)
    return to_fraction(val.constant())


def cubic_form(G: TensorPIOp, v: Poly) -> Fraction:
    """``<v, G[v (x) v]>`` computed directly."""
    return inner(v, apply_tensor(G, tensor_state(v)), G.domain)


def scaling_witness(Qop: PIOp, G: TensorPIOp, v: Poly) -> Poly:
    """Return ``vh = lam * v`` with ``<vh, Qop vh> + 2 <vh, G[vh (x) vh]> > 0``.

    Shows that a quadratic form cannot dominate a nonzero cubic term.
    Raises :class:`NoWitness` when ``<v, G[v (x) v]> = 0``.
    """
    c = cubic_form(G, v)
    if c == 0:
        raise NoWitness("cubic term vanishes at v; no witness exists")
    if c < 0:
        v, c = -v, -c
    q = inner(v, apply(Qop, v), Qop.domain)
    if q >= 0:
        return v
    return v.scale(-q / c)
