"""Partial integral operators with polynomial matrix kernels.

A :class:`PIOp` acts on (vector valued) functions of ``s`` on ``[a, b]``::

    (R v)(s) = R0(s) v(s) + int_a^s R1(s, th) v(th) dth + int_s^b R2(s, th) v(th) dth

Kernels are tuples-of-tuples of :class:`~quadpie.polykernel.Poly`.  The
operator is "2-PI" when ``R0`` vanishes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import sympy

from .polykernel import Poly, Var, to_fraction, to_rational

__all__ = [
    "Interval",
    "PIOp",
    "apply",
    "compose",
    "adjoint",
    "add_scale",
    "multiplier",
    "identity",
    "inner",
    "norm_bound",
    "sup_abs",
]

_SWAP = {Var.S: Var.TH, Var.TH: Var.S}
_S_TO_TH = {Var.S: Var.TH}
_S_TO_ZE = {Var.S: Var.ZE}
_TH_TO_ZE = {Var.TH: Var.ZE}


@dataclass(frozen=True)
class Interval:
    a: Fraction
    b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", to_fraction(self.a))
        object.__setattr__(self, "b", to_fraction(self.b))
        if not self.a < self.b:
            raise ValueError(f"empty interval [{self.a}, {self.b}]")

    @classmethod
    def of(cls, dom) -> "Interval":
        if isinstance(dom, Interval):
            return dom
        a, b = dom
        return cls(a, b)

    def to_json(self) -> list[str]:
        return [str(self.a), str(self.b)]

    @property
    def length(self) -> Fraction:
        return self.b - self.a


UNIT = Interval(0, 1)

Kernel = tuple[tuple[Poly, ...], ...]


def _mat(rows, dims=None) -> Kernel:
    if isinstance(rows, Poly) or not isinstance(rows, (list, tuple)):
        rows = [[rows]]
    out = tuple(
        tuple(x if isinstance(x, Poly) else _as_poly(x) for x in row) for row in rows
    )
    if dims is not None and (len(out), len(out[0]) if out else 0) != tuple(dims):
        raise ValueError(f"kernel shape {len(out)}x{len(out[0])} does not match {dims}")
    return out


def _as_poly(x) -> Poly:
    if isinstance(x, str):
        return Poly.from_text(x)
    return Poly.const(x)


def _zeros(r: int, c: int) -> Kernel:
    z = Poly.zero()
    return tuple(tuple(z for _ in range(c)) for _ in range(r))


def _map(k: Kernel, f) -> Kernel:
    return tuple(tuple(f(x) for x in row) for row in k)


def _transpose(k: Kernel) -> Kernel:
    return tuple(zip(*k)) if k else k


def _matmul(A: Kernel, B: Kernel, f=None) -> Kernel:
    """Entrywise products summed over the inner index; ``f`` post-processes each product."""
    rows, inner, cols = len(A), len(B), len(B[0])
    out = []
    for i in range(rows):
        row = []
        for k in range(cols):
            acc = Poly.zero()
            for j in range(inner):
                a, b = A[i][j], B[j][k]
                if a and b:
                    prod = a * b
                    acc = acc + (f(prod) if f else prod)
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def _addk(*ks: Kernel) -> Kernel:
    first = ks[0]
    return tuple(
        tuple(sum((k[i][j] for k in ks[1:]), first[i][j]) for j in range(len(first[0])))
        for i in range(len(first))
    )


class PIOp:
    """Immutable 3-PI operator with polynomial matrix kernels."""

    __slots__ = ("R0", "R1", "R2", "domain", "dims")

    def __init__(self, R0, R1, R2, domain=UNIT):
        self.domain = Interval.of(domain)
        self.R0 = _mat(R0)
        self.dims = (len(self.R0), len(self.R0[0]))
        self.R1 = _mat(R1, self.dims)
        self.R2 = _mat(R2, self.dims)
        for x in (x for row in self.R0 for x in row):
            if x.variables() - {Var.S}:
                raise ValueError(f"multiplier kernel must depend on s only: {x}")
        for k in (self.R1, self.R2):
            for x in (x for row in k for x in row):
                if x.variables() - {Var.S, Var.TH}:
                    raise ValueError(f"integral kernel must depend on s, th only: {x}")

    @classmethod
    def _make(cls, R0, R1, R2, domain, dims):
        op = cls.__new__(cls)
        op.R0, op.R1, op.R2, op.domain, op.dims = R0, R1, R2, domain, dims
        return op

    @classmethod
    def zero(cls, dims=(1, 1), domain=UNIT) -> "PIOp":
        z = _zeros(*dims)
        return cls._make(z, z, z, Interval.of(domain), tuple(dims))

    @property
    def is_2pi(self) -> bool:
        return all(not x for row in self.R0 for x in row)

    @property
    def is_scalar(self) -> bool:
        return self.dims == (1, 1)

    def kernels(self) -> tuple[Kernel, Kernel, Kernel]:
        return self.R0, self.R1, self.R2

    # scalar shortcuts for 1x1 operators
    @property
    def r0(self) -> Poly:
        return self.R0[0][0]

    @property
    def r1(self) -> Poly:
        return self.R1[0][0]

    @property
    def r2(self) -> Poly:
        return self.R2[0][0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PIOp):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.dims == other.dims
            and self.R0 == other.R0
            and self.R1 == other.R1
            and self.R2 == other.R2
        )

    def __hash__(self):
        return hash((self.domain, self.R0, self.R1, self.R2))

    def __add__(self, other: "PIOp") -> "PIOp":
        return add_scale(self, other, 1)

    def __sub__(self, other: "PIOp") -> "PIOp":
        return add_scale(self, other, -1)

    def __neg__(self) -> "PIOp":
        return self.scale(-1)

    def scale(self, c) -> "PIOp":
        c = to_rational(c)
        f = lambda p: p.scale(c)
        return PIOp._make(_map(self.R0, f), _map(self.R1, f), _map(self.R2, f), self.domain, self.dims)

    def __matmul__(self, other: "PIOp") -> "PIOp":
        return compose(self, other)

    @property
    def T(self) -> "PIOp":
        return adjoint(self)

    def row(self, i: int) -> "PIOp":
        return PIOp._make(
            (self.R0[i],), (self.R1[i],), (self.R2[i],), self.domain, (1, self.dims[1])
        )

    def entry(self, i: int, j: int) -> "PIOp":
        return PIOp._make(
            ((self.R0[i][j],),), ((self.R1[i][j],),), ((self.R2[i][j],),), self.domain, (1, 1)
        )

    @staticmethod
    def vstack(ops: Sequence["PIOp"]) -> "PIOp":
        dom = ops[0].domain
        cols = ops[0].dims[1]
        for op in ops:
            if op.domain != dom or op.dims[1] != cols:
                raise ValueError("vstack needs equal column counts and domains")
        R0 = tuple(r for op in ops for r in op.R0)
        R1 = tuple(r for op in ops for r in op.R1)
        R2 = tuple(r for op in ops for r in op.R2)
        return PIOp._make(R0, R1, R2, dom, (len(R0), cols))

    def max_degree(self) -> int:
        return max(x.degree() for k in self.kernels() for row in k for x in row)

    def to_json(self) -> dict:
        text = lambda k: [[x.to_text() for x in row] for row in k]
        return {
            "dims": list(self.dims),
            "domain": self.domain.to_json(),
            "R0": text(self.R0),
            "R1": text(self.R1),
            "R2": text(self.R2),
        }

    @classmethod
    def from_json(cls, data) -> "PIOp":
        if isinstance(data, str):
            data = json.loads(data)
        parse = lambda k: [[Poly.from_text(x) for x in row] for row in k]
        op = cls(parse(data["R0"]), parse(data["R1"]), parse(data["R2"]), data["domain"])
        if list(op.dims) != list(data.get("dims", op.dims)):
            raise ValueError("dims field disagrees with kernel shapes")
        return op

    def __repr__(self) -> str:
        if self.is_scalar:
            return f"PIOp(R0={self.r0}, R1={self.r1}, R2={self.r2})"
        return f"PIOp(dims={self.dims})"


def identity(n: int = 1, domain=UNIT) -> PIOp:
    z = Poly.zero()
    one = Poly.one()
    R0 = tuple(tuple(one if i == j else z for j in range(n)) for i in range(n))
    zz = _zeros(n, n)
    return PIOp._make(R0, zz, zz, Interval.of(domain), (n, n))


def multiplier(c, domain=UNIT) -> PIOp:
    """Operator ``v -> c(s) v``; ``c`` is a Poly in s (or a matrix of them)."""
    R0 = _mat(c)
    z = _zeros(len(R0), len(R0[0]))
    return PIOp(R0, z, z, domain)


def add_scale(A: PIOp, B: PIOp, lam=1) -> PIOp:
    """Kernel-wise ``A + lam * B``."""
    if A.dims != B.dims or A.domain != B.domain:
        raise ValueError("operators differ in shape or domain")
    lam = to_rational(lam)

    def comb(X, Y):
        return tuple(
            tuple(x + y.scale(lam) for x, y in zip(rx, ry)) for rx, ry in zip(X, Y)
        )

    return PIOp._make(comb(A.R0, B.R0), comb(A.R1, B.R1), comb(A.R2, B.R2), A.domain, A.dims)


def apply(op: PIOp, v) -> Poly | tuple[Poly, ...]:
    """Exact action on a polynomial function of s (or a column of them)."""
    scalar_in = isinstance(v, Poly)
    vec = (v,) if scalar_in else tuple(v)
    if len(vec) != op.dims[1]:
        raise ValueError(f"operator takes {op.dims[1]} inputs, got {len(vec)}")
    for x in vec:
        if x.variables() - {Var.S}:
            raise ValueError("test function must depend on s only")
    a, b = op.domain.a, op.domain.b
    vth = [x.permute(_S_TO_TH) for x in vec]
    out = []
    for i in range(op.dims[0]):
        acc = Poly.zero()
        for j, (x, xt) in enumerate(zip(vec, vth)):
            if op.R0[i][j]:
                acc = acc + op.R0[i][j] * x
            if op.R1[i][j]:
                acc = acc + (op.R1[i][j] * xt).integrate(Var.TH, a, Var.S)
            if op.R2[i][j]:
                acc = acc + (op.R2[i][j] * xt).integrate(Var.TH, Var.S, b)
        out.append(acc)
    if scalar_in and op.dims[0] == 1:
        return out[0]
    return tuple(out)


def compose(A: PIOp, B: PIOp) -> PIOp:
    """Kernels of ``A o B``."""
    if A.dims[1] != B.dims[0]:
        raise ValueError(f"cannot compose {A.dims} with {B.dims}")
    if A.domain != B.domain:
        raise ValueError("operators live on different domains")
    a, b = A.domain.a, A.domain.b
    S, TH = Var.S, Var.TH

    A0, A1z, A2z = A.R0, _map(A.R1, lambda p: p.permute(_TH_TO_ZE)), _map(A.R2, lambda p: p.permute(_TH_TO_ZE))
    B0th = _map(B.R0, lambda p: p.permute(_S_TO_TH))
    B1z, B2z = _map(B.R1, lambda p: p.permute(_S_TO_ZE)), _map(B.R2, lambda p: p.permute(_S_TO_ZE))

    def integ(lo, hi):
        return lambda p: p.integrate(Var.ZE, lo, hi)

    C0 = _matmul(A0, B.R0)
    C1 = _addk(
        _matmul(A0, B.R1),
        _matmul(A.R1, B0th),
        _matmul(A1z, B1z, integ(TH, S)),
        _matmul(A1z, B2z, integ(a, TH)),
        _matmul(A2z, B1z, integ(S, b)),
    )
    C2 = _addk(
        _matmul(A0, B.R2),
        _matmul(A.R2, B0th),
        _matmul(A2z, B2z, integ(S, TH)),
        _matmul(A2z, B1z, integ(TH, b)),
        _matmul(A1z, B2z, integ(a, S)),
    )
    return PIOp._make(C0, C1, C2, A.domain, (A.dims[0], B.dims[1]))


def adjoint(op: PIOp) -> PIOp:
    """L2 adjoint: transpose, and swap the triangular kernels with arguments exchanged."""
    sw = lambda p: p.permute(_SWAP)
    return PIOp._make(
        _transpose(op.R0),
        _transpose(_map(op.R2, sw)),
        _transpose(_map(op.R1, sw)),
        op.domain,
        (op.dims[1], op.dims[0]),
    )


def inner(u, v, domain=UNIT) -> Fraction:
    """Exact L2 inner product of polynomial functions (or columns of them) of s."""
    dom = Interval.of(domain)
    us = (u,) if isinstance(u, Poly) else tuple(u)
    vs = (v,) if isinstance(v, Poly) else tuple(v)
    if len(us) != len(vs):
        raise ValueError("length mismatch")
    total = Poly.zero()
    for x, y in zip(us, vs):
        total = total + x * y
    return to_fraction(total.integrate(Var.S, dom.a, dom.b).constant())


def sup_abs(p: Poly, domain=UNIT) -> float:
    """Upper bound for max |p(s)| on the domain, tight to about 1e-12.

    Critical points are isolated into rational intervals (sympy), refined,
    and each interior value is padded by a Lipschitz bound times the
    interval width so the result never underestimates.
    """
    if p.variables() - {Var.S}:
        raise ValueError("sup_abs expects a polynomial in s")
    dom = Interval.of(domain)
    a, b = dom.a, dom.b
    vals = [abs(p.eval({Var.S: a})), abs(p.eval({Var.S: b}))]
    deg = p.degree_in(Var.S)
    if deg >= 2:
        x = sympy.Symbol("x")
        dp = sympy.Poly(
            sum(sympy.Rational(str(c)) * e * x ** (e - 1) for (e, *_), c in p.items() if e),
            x,
        )
        # Lipschitz constant of p on the domain
        R = max(abs(a), abs(b))
        lip = sum(abs(to_fraction(c)) * e * R ** (e - 1) for (e, *_), c in p.items() if e)
        eps = Fraction(1, 10**13)
        for (lo, hi), _ in dp.intervals(eps=sympy.Rational(1, 10**13)):
            lo, hi = Fraction(str(lo)), Fraction(str(hi))
            if hi < a or lo > b:
                continue
            lo, hi = max(lo, a), min(hi, b)
            mid = (lo + hi) / 2
            vals.append(abs(p.eval({Var.S: mid})) + lip * max(hi - lo, eps))
    return float(max(vals)) * (1 + 4e-16)


def _hs_squared(k: Poly, domain: Interval, lower: bool) -> Fraction:
    sq = k * k
    if lower:
        inner_int = sq.integrate(Var.TH, domain.a, Var.S)
    else:
        inner_int = sq.integrate(Var.TH, Var.S, domain.b)
    return to_fraction(inner_int.integrate(Var.S, domain.a, domain.b).constant())


def norm_bound(op: PIOp) -> float:
    """Upper bound on the L2 operator norm: sup|R0| + HS(R1) + HS(R2).

    Hilbert-Schmidt norms are taken over the triangle where each kernel acts.
    For matrix kernels the multiplier part uses the Frobenius norm of R0,
    bounded entrywise.
    """
    dom = op.domain
    if op.is_scalar:
        m0 = sup_abs(op.r0, dom) if op.r0 else 0.0
    else:
        m0 = math.sqrt(sum(sup_abs(x, dom) ** 2 for row in op.R0 for x in row if x))
    h1 = sum(_hs_squared(x, dom, True) for row in op.R1 for x in row if x)
    h2 = sum(_hs_squared(x, dom, False) for row in op.R2 for x in row if x)
    return m0 + _sqrt_up(h1) + _sqrt_up(h2)


def _sqrt_up(q: Fraction) -> float:
    return math.sqrt(float(q)) * (1 + 1e-15) if q else 0.0
