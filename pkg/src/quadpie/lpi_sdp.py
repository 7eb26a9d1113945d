"""Semidefinite feasibility test for exponential stability of a quadratic PIE.

We look for ``P = eps I + Z* Q_P Z`` with ``Q_P >= 0`` such that::

    A* P T + T* P A + delta T* T = -Z_D* Q_D Z_D,   Q_D >= 0
    K_lin[T* P B] = 0

The last condition is exact by default.  With ``klin_tol > 0`` each
coefficient of ``K_lin[T* P B]`` is only bounded by ``klin_tol`` in absolute
value.  Some systems (KdV and KSE with r != 0) admit no nonzero polynomial
``P`` with an exactly vanishing cubic term, since the ideal weight is
exponential; the tolerance lets a polynomial ``P`` approximate it.

``Z`` stacks ``[Z1(s) v; int_a^s Z2 v; int_s^b Z2 v]`` with monomial vectors
``Z1``, ``Z2``.  The left side of the first equation never has a multiplier
term (``T`` has none), so ``Z_D`` carries only the two integral blocks.

Both equations are linear in the upper-triangular entries of ``Q_P`` and
``Q_D``.  Rows are built exactly by expanding ``P`` over a monomial basis of
self-adjoint operators, pushing each basis element through the operator
algebra once, and matching polynomial coefficients.
"""

from __future__ import annotations

import json
import logging
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from gmpy2 import mpq
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .pde2pie import PDESpec, PIESpec, assemble_pie
from .pialgebra import Interval, PIOp, adjoint, apply, compose, identity, inner, multiplier, norm_bound
from .polykernel import Poly, Var, to_fraction, to_rational
from .simulate import symmetric_spectrum
from .tensorpi import SimplexFunctional, TensorPIOp, compose_3pi_tensor, klin

__all__ = [
    "DEFAULT_EPS",
    "DEFAULT_DELTA",
    "DEFAULT_DEGREES",
    "DEFAULT_TOL_R",
    "DegreeError",
    "SweepError",
    "ZFactor",
    "build_zfactor",
    "positive_op",
    "AffinePoly",
    "Row",
    "coeff_match",
    "SDPProblem",
    "assemble_stability",
    "StabilityFamily",
    "Certificate",
    "Infeasible",
    "Unknown",
    "solve",
    "check_certificate",
    "CheckReport",
    "certify",
    "sweep",
    "SweepResult",
    "export_sdpa",
    "read_sdpa",
    "solve_sdpa",
]

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-4
DEFAULT_DELTA = 1e-6
DEFAULT_DEGREES = (2, 2)
DEFAULT_TOL_R = 1e-3

S, TH = Var.S, Var.TH
_SWAP = {S: TH, TH: S}


class DegreeError(ValueError):
    """The chosen monomial degrees cannot represent the required kernels."""


class SweepError(ValueError):
    """Sweep bracket does not straddle the stability threshold."""


# --------------------------------------------------------------------------
# monomial factors and positive operators


def monomials2(d: int) -> list[Poly]:
    """Monomials s^i th^j with i + j <= d, by total degree then descending s power."""
    out = []
    for tot in range(d + 1):
        for i in range(tot, -1, -1):
            out.append(Poly.monomial((i, tot - i, 0, 0)))
    return out


@dataclass(frozen=True)
class ZFactor:
    domain: Interval
    d1: int
    d2: int
    z1: tuple[Poly, ...]
    z2: tuple[Poly, ...]

    @property
    def m1(self) -> int:
        return len(self.z1)

    @property
    def m2(self) -> int:
        return len(self.z2)

    @property
    def m(self) -> int:
        return self.m1 + 2 * self.m2

    def rows(self) -> list[PIOp]:
        z = Poly.zero()
        out = [PIOp._make(((p,),), ((z,),), ((z,),), self.domain, (1, 1)) for p in self.z1]
        out += [PIOp._make(((z,),), ((p,),), ((z,),), self.domain, (1, 1)) for p in self.z2]
        out += [PIOp._make(((z,),), ((z,),), ((p,),), self.domain, (1, 1)) for p in self.z2]
        return out

    @property
    def op(self) -> PIOp:
        return PIOp.vstack(self.rows())


def build_zfactor(domain, d1: int, d2: int, multiplier_block: bool = True) -> ZFactor:
    """Monomial factor; ``d1 < 0`` or ``multiplier_block=False`` drops the Z1 rows."""
    if d2 < 0:
        raise ValueError("d2 must be non-negative")
    z1 = tuple(Poly.monomial((k, 0, 0, 0)) for k in range(d1 + 1)) if multiplier_block else ()
    return ZFactor(Interval.of(domain), d1, d2, z1, tuple(monomials2(d2)))


def positive_op(Q, Z: ZFactor) -> PIOp:
    """``Z* Q Z`` for a symmetric numeric matrix ``Q`` (rationals or floats)."""
    Q = [[to_rational(x) for x in row] for row in Q]
    if len(Q) != Z.m or any(len(r) != Z.m for r in Q):
        raise ValueError(f"Q must be {Z.m}x{Z.m}")
    if any(Q[i][j] != Q[j][i] for i in range(Z.m) for j in range(i)):
        raise ValueError("Q must be symmetric")
    Zop = Z.op
    Qop = multiplier([[Poly.const(x) for x in row] for row in Q], Z.domain)
    return compose(adjoint(Zop), compose(Qop, Zop))


# --------------------------------------------------------------------------
# affine kernels and coefficient matching


class AffinePoly:
    """Polynomial whose coefficients are affine in decision variables.

    ``const + sum_k x_k * lin[k]`` with ``lin`` mapping variable index -> Poly.
    """

    __slots__ = ("const", "lin")

    def __init__(self, const: Poly | None = None, lin: Mapping[int, Poly] | None = None):
        self.const = const if const is not None else Poly.zero()
        self.lin = {k: p for k, p in (lin or {}).items() if p}

    def __add__(self, other) -> "AffinePoly":
        if isinstance(other, Poly):
            return AffinePoly(self.const + other, self.lin)
        lin = dict(self.lin)
        for k, p in other.lin.items():
            lin[k] = lin[k] + p if k in lin else p
        return AffinePoly(self.const + other.const, lin)

    def scale(self, c) -> "AffinePoly":
        return AffinePoly(self.const.scale(c), {k: p.scale(c) for k, p in self.lin.items()})

    def __neg__(self) -> "AffinePoly":
        return self.scale(-1)

    def __sub__(self, other) -> "AffinePoly":
        if isinstance(other, Poly):
            return self + (-other)
        return self + (-other)

    def degree(self) -> int:
        return max([self.const.degree()] + [p.degree() for p in self.lin.values()])

    def value(self, x: Mapping[int, object]) -> Poly:
        out = self.const
        for k, p in self.lin.items():
            c = x.get(k, 0)
            if c:
                out = out + p.scale(c)
        return out


@dataclass
class Row:
    """``sum coeffs[k] x_k = rhs``, labelled by kernel slot and monomial."""

    coeffs: dict[int, mpq]
    rhs: mpq
    label: str = ""

    @property
    def inconsistent(self) -> bool:
        return not self.coeffs and self.rhs != 0


def coeff_match(lhs: Mapping[str, AffinePoly | Poly], rhs: Mapping[str, AffinePoly | Poly]) -> list[Row]:
    """One row per (slot, monomial) where ``lhs - rhs`` has a nonzero coefficient."""
    rows = []
    for slot in sorted(set(lhs) | set(rhs)):
        diff = _affine(lhs.get(slot)) - _affine(rhs.get(slot))
        rows.extend(_rows_of(diff, slot))
    return rows


def _affine(x) -> AffinePoly:
    if x is None:
        return AffinePoly()
    if isinstance(x, Poly):
        return AffinePoly(x)
    return x


def _rows_of(diff: AffinePoly, slot: str) -> list[Row]:
    table: dict[int, dict[int, mpq]] = {}
    for k, p in diff.lin.items():
        for mono, c in p._t.items():
            table.setdefault(mono, {})[k] = c
    for mono in diff.const._t:
        table.setdefault(mono, {})
    rows = []
    from .polykernel import _unpack  # packed key -> exponent tuple

    for mono in sorted(table):
        coeffs = table[mono]
        rhs = -diff.const._t.get(mono, mpq(0))
        rows.append(Row(coeffs, rhs, f"{slot}:{_unpack(mono)}"))
    return rows


# --------------------------------------------------------------------------
# problem assembly


@dataclass
class SDPProblem:
    """Find symmetric ``Y_b >= 0`` with ``sum coeffs * Y[var] = rhs`` for every row.

    ``var_index[k] = (block, i, j)`` with ``i <= j`` names the decision
    variables; off-diagonal variables stand for both symmetric entries.
    """

    blocks: list[tuple[str, int]]
    var_index: list[tuple[int, int, int]]
    rows: list[Row]
    metadata: dict = field(default_factory=dict)
    context: object = field(default=None, repr=False, compare=False)
    klin_tol: float = 0.0  # > 0: rows labelled "klin" only need |lhs - rhs| <= klin_tol

    @property
    def n_vars(self) -> int:
        return len(self.var_index)

    def inconsistent_rows(self) -> list[Row]:
        return [r for r in self.rows if r.inconsistent]

    def bounded_mask(self) -> np.ndarray:
        """True for rows that are two-sided bounds rather than equalities."""
        return np.array([self.klin_tol > 0 and r.label.startswith("klin") for r in self.rows], dtype=bool)

    def float_system(self) -> tuple[sp.csr_matrix, np.ndarray, float]:
        """Sparse float rows plus the largest rational-to-float conversion error."""
        data, ri, ci, rhs = [], [], [], []
        err = 0.0
        for r, row in enumerate(self.rows):
            for k, c in row.coeffs.items():
                f = float(c)
                err = max(err, abs(float(c - mpq(f))))
                data.append(f)
                ri.append(r)
                ci.append(k)
            f = float(row.rhs)
            err = max(err, abs(float(row.rhs - mpq(f))))
            rhs.append(f)
        A = sp.csr_matrix((data, (ri, ci)), shape=(len(self.rows), self.n_vars))
        return A, np.array(rhs), err


def _var_index(blocks: Sequence[tuple[str, int]]) -> list[tuple[int, int, int]]:
    out = []
    for b, (_, size) in enumerate(blocks):
        out += [(b, i, j) for i in range(size) for j in range(i, size)]
    return out


def _lower(op: PIOp) -> Poly:
    """Lower kernel of ``op + op*``."""
    return op.r1 + op.r2.permute(_SWAP)


def _sym_pair(Ci: PIOp, diag: bool) -> tuple[Poly, Poly]:
    """(multiplier, lower kernel) of ``C`` if diag else of ``C + C*``."""
    if diag:
        return Ci.r0, Ci.r1
    return Ci.r0.scale(2), _lower(Ci)


def _gram_pieces(Z: ZFactor) -> list[tuple[Poly, Poly, PIOp]]:
    """For each upper-triangular (i, j): multiplier and lower kernel of the symmetrized Z_i* Z_j."""
    rows = Z.rows()
    adj = [adjoint(r) for r in rows]
    out = []
    for i in range(Z.m):
        for j in range(i, Z.m):
            C = compose(adj[i], rows[j])
            m0, l1 = _sym_pair(C, i == j)
            out.append((m0, l1, C))
    return out


def _basis_op(kind: str, mono: Poly, dom: Interval) -> PIOp:
    z = Poly.zero()
    if kind == "0":
        return PIOp._make(((mono,),), ((z,),), ((z,),), dom, (1, 1))
    return PIOp._make(((z,),), ((mono,),), ((mono.permute(_SWAP),),), dom, (1, 1))


@dataclass
class _Pieces:
    """Exact images of the P-basis under the two constraint maps."""

    keys: list[tuple[str, int]]
    lhs: list[Poly]  # lower kernel of A* E T + T* E A
    kl: list[Poly]  # K_lin[T* E B]
    tt: Poly  # lower kernel of T* T
    lhs_degree: int


def _basis_keys(gram: list[tuple[Poly, Poly, PIOp]]) -> list[tuple[str, int]]:
    keys = {("0", 0)}
    for m0, l1, _ in gram:
        keys.update(("0", k) for k in m0._t)
        keys.update(("1", k) for k in l1._t)
    return sorted(keys)


def _pieces(pie: PIESpec, keys: list[tuple[str, int]]) -> _Pieces:
    dom = pie.domain
    Ts = adjoint(pie.T)
    TsA = compose(Ts, pie.A)
    lhs, kl = [], []
    for kind, key in keys:
        E = _basis_op(kind, Poly._raw({key: mpq(1)}), dom)
        X = compose(compose(Ts, E), pie.A)
        L = _lower(X)
        lhs.append(L)
        kl.append(klin(compose_3pi_tensor(compose(Ts, E), pie.B)).K)
        if X.r0:
            raise AssertionError("left-hand side unexpectedly has a multiplier term")
    tt = compose(Ts, pie.T).r1
    deg = max([p.degree() for p in lhs] + [tt.degree()])
    return _Pieces(keys, lhs, kl, tt, deg)


def _combine(polys: Iterable[tuple[object, Poly]]) -> Poly:
    acc: dict[int, mpq] = {}
    for c, p in polys:
        c = to_rational(c)
        for k, v in p._t.items():
            acc[k] = acc.get(k, 0) + c * v
    return Poly._raw({k: v for k, v in acc.items() if v})


def min_neg_degree(lhs_degree: int) -> int:
    """Smallest Z_D degree whose Gram kernels (degree 2 d + 1) reach ``lhs_degree``."""
    return max(0, math.ceil((lhs_degree - 1) / 2))


@dataclass
class _Context:
    pie: PIESpec
    Z: ZFactor
    ZD: ZFactor
    gram: list  # (m0, l1, C) per Q_P variable
    pieces: _Pieces
    eps: mpq
    delta: mpq
    nP: int


class _Builder:
    """Degree-dependent but r-independent part of the assembly (Gram kernels)."""

    def __init__(self, domain, degrees, neg_degree=None, neg_extra=0):
        d1, d2 = degrees
        if d1 < 0 or d2 < 0:
            raise ValueError("degrees must be non-negative")
        self.domain = Interval.of(domain)
        self.degrees = (d1, d2)
        self.Z = build_zfactor(self.domain, d1, d2)
        self.gram = _gram_pieces(self.Z)
        self.keys = _basis_keys(self.gram)
        self.neg_degree = neg_degree
        self.neg_extra = neg_extra
        self._neg_cache: dict[int, tuple[ZFactor, list[Poly]]] = {}

    def neg_gram(self, d: int):
        if d not in self._neg_cache:
            ZD = build_zfactor(self.domain, -1, d, multiplier_block=False)
            lows = [l1 for _, l1, _ in _gram_pieces(ZD)]
            self._neg_cache[d] = (ZD, lows)
        return self._neg_cache[d]

    def choose_neg_degree(self, lhs_degree: int) -> int:
        need = min_neg_degree(lhs_degree)
        if self.neg_degree is not None:
            if self.neg_degree < need:
                raise DegreeError(
                    f"negativity factor degree {self.neg_degree} is too low: the left-hand kernel has "
                    f"degree {lhs_degree}, which needs a negativity degree of at least {need}"
                )
            return self.neg_degree
        return need + self.neg_extra


def _raw_rows(builder: _Builder, pieces: _Pieces, eps: mpq, delta: mpq, dneg: int):
    """Unreduced negativity rows and K_lin rows as AffinePoly differences."""
    kidx = {k: n for n, k in enumerate(pieces.keys)}
    nP = len(builder.gram)
    lhs = AffinePoly(_combine([(eps, pieces.lhs[kidx[("0", 0)]]), (delta, pieces.tt)]))
    kl = AffinePoly(pieces.kl[kidx[("0", 0)]].scale(eps))
    lin_l, lin_k = {}, {}
    for v, (m0, l1, _) in enumerate(builder.gram):
        coefs = [(c, kidx[("0", k)]) for k, c in m0._t.items()] + [
            (c, kidx[("1", k)]) for k, c in l1._t.items()
        ]
        lin_l[v] = _combine((c, pieces.lhs[b]) for c, b in coefs)
        lin_k[v] = _combine((c, pieces.kl[b]) for c, b in coefs)
    ZD, lows = builder.neg_gram(dneg)
    for w, l1 in enumerate(lows):
        lin_l[nP + w] = l1
    return AffinePoly(lhs.const, lin_l), AffinePoly(kl.const, lin_k), ZD


def _reduce_klin(rows: list[Row], n_vars: int) -> list[Row]:
    """Replace K_lin rows by an exact reduced row-echelon basis."""
    live = [r for r in rows if r.coeffs or r.rhs]
    if not live:
        return []
    mat = [[QQ(0)] * (n_vars + 1) for _ in live]
    for i, r in enumerate(live):
        for k, c in r.coeffs.items():
            mat[i][k] = QQ(int(c.numerator), int(c.denominator))
        mat[i][n_vars] = QQ(int(r.rhs.numerator), int(r.rhs.denominator))
    dm = DomainMatrix(mat, (len(live), n_vars + 1), QQ)
    rref, pivots = dm.rref()
    dense = rref.to_Matrix()
    out = []
    for i in range(len(pivots)):
        coeffs = {}
        for k in range(n_vars):
            x = dense[i, k]
            if x != 0:
                coeffs[k] = mpq(int(x.p), int(x.q))
        x = dense[i, n_vars]
        out.append(Row(coeffs, mpq(int(x.p), int(x.q)), f"klin:rref{i}"))
    return out


def _build_problem(builder: _Builder, pie: PIESpec, pieces: _Pieces, eps, delta, dneg, meta, klin_tol=0.0) -> SDPProblem:
    eps, delta = to_rational(eps), to_rational(delta)
    neg, kl, ZD = _raw_rows(builder, pieces, eps, delta, dneg)
    blocks = [("Q_P", builder.Z.m), ("Q_D", ZD.m)]
    var_index = _var_index(blocks)
    n_vars = len(var_index)
    neg_rows = [r for r in _rows_of(neg, "neg") if r.coeffs or r.rhs]
    kl_rows = _rows_of(kl, "klin")
    if klin_tol > 0:
        kl_rows = [r for r in kl_rows if r.coeffs or abs(r.rhs) > klin_tol]
    else:
        kl_rows = _reduce_klin(kl_rows, n_vars)
    metadata = dict(meta)
    metadata.update(
        degrees=list(builder.degrees),
        neg_degree=dneg,
        eps=float(eps),
        delta=float(delta),
        lhs_degree=pieces.lhs_degree,
        rows_negativity=len(neg_rows),
        rows_klin=len(kl_rows),
        klin_tol=float(klin_tol),
    )
    ctx = _Context(pie, builder.Z, ZD, builder.gram, pieces, eps, delta, len(builder.gram))
    return SDPProblem(blocks, var_index, neg_rows + kl_rows, metadata, ctx, float(klin_tol))


def assemble_stability(
    pie: PIESpec,
    eps=DEFAULT_EPS,
    delta=DEFAULT_DELTA,
    degrees=DEFAULT_DEGREES,
    neg_degree: int | None = None,
    neg_extra: int = 0,
    klin_tol: float = 0.0,
) -> SDPProblem:
    """Exact SDP rows for the stability conditions at the given monomial degrees.

    ``neg_degree`` fixes the degree of the negativity factor; by default the
    smallest degree able to represent the left-hand kernel is used (plus
    ``neg_extra``).  A too-small explicit value raises :class:`DegreeError`.
    ``klin_tol > 0`` relaxes the cubic condition to a coefficient bound.
    """
    if klin_tol < 0:
        raise ValueError("klin_tol must be non-negative")
    builder = _Builder(pie.domain, degrees, neg_degree, neg_extra)
    pieces = _pieces(pie, builder.keys)
    dneg = builder.choose_neg_degree(pieces.lhs_degree)
    return _build_problem(builder, pie, pieces, eps, delta, dneg, {}, klin_tol)


def _lerp_poly(p0: Poly, p1: Poly, t: mpq) -> Poly:
    return _combine([(1 - t, p0), (t, p1)])


def _is_affine(f0, f1, f2) -> bool:
    return f2 == f1 + f1 - f0


class StabilityFamily:
    """Stability problems for a PDE family ``r -> PDESpec``.

    When the assembled PIE is exactly affine in ``r`` (checked at r = 0, 1, 2)
    the operator images are computed twice and interpolated; otherwise every
    ``r`` is assembled from scratch.
    """

    def __init__(
        self,
        builder: Callable[[Fraction], PDESpec],
        degrees=DEFAULT_DEGREES,
        eps=DEFAULT_EPS,
        delta=DEFAULT_DELTA,
        neg_degree: int | None = None,
        neg_extra: int = 0,
        name: str = "",
        klin_tol: float = 0.0,
    ):
        if klin_tol < 0:
            raise ValueError("klin_tol must be non-negative")
        self.family = builder
        self.eps, self.delta = eps, delta
        self.klin_tol = float(klin_tol)
        self.name = name
        pies = [assemble_pie(builder(Fraction(k))) for k in range(3)]
        self.domain = pies[0].domain
        self.builder = _Builder(self.domain, degrees, neg_degree, neg_extra)
        same_T = pies[0].T == pies[1].T == pies[2].T
        self.affine = same_T and all(
            _is_affine(*(getattr(p, attr) for p in pies)) for attr in ("A", "B")
        )
        self._pieces0 = self._pieces1 = None
        if self.affine:
            self._pieces0 = _pieces(pies[0], self.builder.keys)
            self._pieces1 = _pieces(pies[1], self.builder.keys)
            deg = max(self._pieces0.lhs_degree, self._pieces1.lhs_degree)
            self.dneg = self.builder.choose_neg_degree(deg)
        else:
            self.dneg = None

    def pie(self, r) -> PIESpec:
        return assemble_pie(self.family(to_fraction(r)))

    def problem(self, r) -> SDPProblem:
        r = to_fraction(r)
        pie = self.pie(r)
        meta = {"r": str(r), "family": self.name}
        if self.affine:
            t = to_rational(r)
            p0, p1 = self._pieces0, self._pieces1
            pieces = _Pieces(
                p0.keys,
                [_lerp_poly(a, b, t) for a, b in zip(p0.lhs, p1.lhs)],
                [_lerp_poly(a, b, t) for a, b in zip(p0.kl, p1.kl)],
                p0.tt,
                max(p0.lhs_degree, p1.lhs_degree),
            )
            return _build_problem(self.builder, pie, pieces, self.eps, self.delta, self.dneg, meta, self.klin_tol)
        pieces = _pieces(pie, self.builder.keys)
        dneg = self.builder.choose_neg_degree(pieces.lhs_degree)
        return _build_problem(self.builder, pie, pieces, self.eps, self.delta, dneg, meta, self.klin_tol)


# --------------------------------------------------------------------------
# solving and certificates


@dataclass
class Certificate:
    P: PIOp
    eps: float
    delta: float
    mu: float
    Q_P: np.ndarray
    Q_D: np.ndarray
    solver: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    @property
    def decay_rate(self) -> float:
        """Exponent in ``V(t) <= V(0) exp(-rate t)``."""
        return self.delta / self.mu

    @property
    def transient(self) -> float:
        """Constant in ``||u(t)||^2 <= transient ||u(0)||^2 exp(-rate t)``."""
        return self.mu / self.eps

    def bound(self, u0_sq: float, t) -> np.ndarray:
        return self.transient * u0_sq * np.exp(-self.decay_rate * np.asarray(t, dtype=float))

    def to_json(self) -> dict:
        return {
            "P": self.P.to_json(),
            "eps": self.eps,
            "delta": self.delta,
            "mu": self.mu,
            "decay_rate": self.decay_rate,
            "transient": self.transient,
            "Q_P": self.Q_P.tolist(),
            "residuals": self.residuals,
            "solver": self.solver,
        }


@dataclass
class Infeasible:
    status: str
    detail: str = ""


@dataclass
class Unknown:
    status: str
    detail: str = ""


def _dyadic(x: float, scale: float) -> mpq:
    """Round to a multiple of 2^-50 * scale (exact rational)."""
    if scale <= 0:
        return mpq(0)
    e = math.floor(math.log2(scale)) - 50
    q = round(x / 2.0**e)
    return mpq(q) * (mpq(2) ** e) if e < 0 else mpq(q * 2**e)


def _unpack_blocks(prob: SDPProblem, x: np.ndarray) -> list[np.ndarray]:
    mats = [np.zeros((n, n)) for _, n in prob.blocks]
    for k, (b, i, j) in enumerate(prob.var_index):
        mats[b][i, j] = mats[b][j, i] = x[k]
    return mats


def _solve_cvxpy(A: sp.csr_matrix, rhs: np.ndarray, blocks, var_index, solver: str, bounded=None, bound: float = 0.0):
    import cvxpy as cp

    n_vars = len(var_index)
    X = [cp.Variable((n, n), symmetric=True) for _, n in blocks]
    # gather upper-triangular entries into one vector, in var_index order
    pieces = []
    for b, (_, n) in enumerate(blocks):
        idx = [i * n + j for (bb, i, j) in var_index if bb == b]
        pieces.append(cp.vec(X[b], order="C")[idx])
    x = cp.hstack(pieces) if len(pieces) > 1 else pieces[0]
    cons = [Xb >> 0 for Xb in X]
    eq = np.ones(A.shape[0], dtype=bool) if bounded is None else ~bounded
    if eq.any():
        Ae, be = A[eq], rhs[eq]
        scale = np.maximum(abs(Ae).max(axis=1).toarray().ravel(), 1e-300)
        cons.append(sp.diags(1.0 / scale) @ Ae @ x == be / scale)
    if bounded is not None and bounded.any():
        cons.append(cp.abs(A[bounded] @ x - rhs[bounded]) <= bound)
    prob = cp.Problem(cp.Minimize(0), cons)
    t0 = time.perf_counter()
    try:
        prob.solve(solver=solver)
    except cp.error.SolverError as exc:
        return "solver_error", None, {"error": str(exc), "seconds": time.perf_counter() - t0}
    stats = {"seconds": time.perf_counter() - t0, "solver": solver}
    if prob.status in ("optimal", "optimal_inaccurate") and X[0].value is not None:
        vals = np.zeros(n_vars)
        for b, (_, n) in enumerate(blocks):
            M = X[b].value
            for k, (bb, i, j) in enumerate(var_index):
                if bb == b:
                    vals[k] = 0.5 * (M[i, j] + M[j, i])
        if eq.any():
            res = A[eq] @ vals - rhs[eq]
            stats["max_row_residual"] = float(np.max(np.abs(res)))
        return prob.status, vals, stats
    return prob.status, None, stats


def solve(prob: SDPProblem, backend: str = "CLARABEL") -> Certificate | Infeasible | Unknown:
    """Solve the feasibility program; returns a certificate, Infeasible, or Unknown."""
    bad = prob.inconsistent_rows()
    if bad:
        return Infeasible("inconsistent", f"row {bad[0].label} reads 0 = {bad[0].rhs}")
    A, rhs, conv_err = prob.float_system()
    if prob.rows:
        bounded = prob.bounded_mask() if prob.klin_tol > 0 else None
        status, x, stats = _solve_cvxpy(A, rhs, prob.blocks, prob.var_index, backend, bounded, prob.klin_tol)
    else:
        status, x, stats = "optimal", np.zeros(prob.n_vars), {"solver": "none"}
    stats["conversion_error"] = conv_err
    stats["status"] = status
    if status == "infeasible":
        return Infeasible(status)
    if status not in ("optimal", "optimal_inaccurate"):
        return Unknown(status, json.dumps(stats, default=str))
    ctx = prob.context
    mats = _unpack_blocks(prob, x)
    if ctx is None:
        return Certificate(PIOp.zero(), 0.0, 0.0, 0.0, mats[0], mats[-1], stats)
    qp = _project_klin(prob, x[: ctx.nP])
    P = certificate_operator(ctx, qp)
    cert = Certificate(
        P=P,
        eps=float(ctx.eps),
        delta=float(ctx.delta),
        mu=norm_bound(P),
        Q_P=_unpack_blocks(prob, np.concatenate([np.array([float(v) for v in qp]), x[ctx.nP:]]))[0],
        Q_D=mats[1],
        solver=stats,
    )
    cert._ctx = ctx  # type: ignore[attr-defined]
    return cert


def _project_klin(prob: SDPProblem, y: np.ndarray) -> list[mpq]:
    """Round Q_P to dyadic rationals, then project exactly onto the K_lin rows."""
    ctx = prob.context
    nP = ctx.nP
    scale = float(np.max(np.abs(y))) if len(y) else 0.0
    yq = [_dyadic(float(v), scale) for v in y]
    rows = [r for r in prob.rows if r.label.startswith("klin")]
    if not rows or prob.klin_tol > 0:
        return yq
    if any(k >= nP for r in rows for k in r.coeffs):
        raise AssertionError("K_lin rows must only involve Q_P")
    C = DomainMatrix(
        [[QQ(int(r.coeffs[k].numerator), int(r.coeffs[k].denominator)) if k in r.coeffs else QQ(0) for k in range(nP)] for r in rows],
        (len(rows), nP),
        QQ,
    )
    yv = DomainMatrix([[QQ(int(v.numerator), int(v.denominator))] for v in yq], (nP, 1), QQ)
    d = DomainMatrix([[QQ(int(r.rhs.numerator), int(r.rhs.denominator))] for r in rows], (len(rows), 1), QQ)
    resid = d - C * yv
    CCt = C * C.transpose()
    lam = CCt.lu_solve(resid)
    corr = C.transpose() * lam
    out = (yv + corr).to_Matrix()
    return [mpq(int(out[k, 0].p), int(out[k, 0].q)) for k in range(nP)]


def certificate_operator(ctx: _Context, qp: Sequence) -> PIOp:
    """Exact ``P = eps I + Z* Q_P Z`` from the upper-triangular entries ``qp``."""
    dom = ctx.pie.domain
    P = identity(1, dom).scale(ctx.eps)
    r0, r1, r2 = [P.r0], [], []
    for c, (_, _, C) in zip(qp, ctx.gram):
        if not c:
            continue
        r0.append(C.r0.scale(c))
        r1.append(C.r1.scale(c))
        r2.append(C.r2.scale(c))
    # off-diagonal entries also contribute the adjoint of C
    k = 0
    m = ctx.Z.m
    for i in range(m):
        for j in range(i, m):
            c = qp[k]
            C = ctx.gram[k][2]
            if c and i != j:
                r0.append(C.r0.scale(c))
                r1.append(C.r2.permute(_SWAP).scale(c))
                r2.append(C.r1.permute(_SWAP).scale(c))
            k += 1
    total = lambda ps: _combine((1, p) for p in ps)
    return PIOp(total(r0), total(r1), total(r2), dom)


@dataclass
class CheckReport:
    """Outcome of :func:`check_certificate`.

    A negativity violation is tolerated only up to ``min(tol, neg_margin)``
    with ``neg_margin = delta ||T||^2``: beyond that the ``delta T* T`` term
    can no longer absorb it on the slowest mode, so the strict inequality is
    lost however small the violation looks in absolute terms.
    """

    positivity: float  # min-eigenvalue proxy of P - eps I
    negativity: float  # min-eigenvalue proxy of -(A* P T + T* P A + delta T* T)
    klin_max: float  # max |coefficient| of K_lin[T* P B]
    q_p_min_eig: float
    tol: float
    neg_margin: float = math.inf

    @property
    def neg_tol(self) -> float:
        return min(self.tol, self.neg_margin)

    @property
    def passed(self) -> bool:
        return self.positivity >= -self.tol and self.negativity >= -self.neg_tol and self.klin_max <= self.tol

    def to_json(self) -> dict:
        return {
            "positivity_min_eig": self.positivity,
            "negativity_min_eig": self.negativity,
            "negativity_tol": self.neg_tol,
            "klin_max_coef": self.klin_max,
            "q_p_min_eig": self.q_p_min_eig,
            "tol": self.tol,
            "passed": self.passed,
        }


def _min_eig_proxy(op: PIOp, n: int, samples: int, rng: random.Random) -> float:
    """Smallest of a Nystrom eigenvalue and Rayleigh quotients at random polynomials."""
    lo = float(symmetric_spectrum(op, n)[0])
    dom = op.domain
    for _ in range(samples):
        deg = rng.randint(0, 6)
        v = Poly({(k, 0, 0, 0): Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for k in range(deg + 1)})
        if not v:
            continue
        num = inner(v, apply(op, v), dom)
        den = inner(v, v, dom)
        lo = min(lo, float(num / den))
    return lo


def check_certificate(cert: Certificate, pie: PIESpec, tol: float = 1e-6, n: int = 40, samples: int = 12, seed: int = 0) -> CheckReport:
    """Re-verify the three stability conditions from the exact kernels of P."""
    rng = random.Random(seed)
    P = cert.P
    eps = to_rational(cert.eps)
    delta = to_rational(cert.delta)
    Ts = adjoint(pie.T)
    pos = _min_eig_proxy(P - identity(1, pie.domain).scale(eps), n, samples, rng)
    X = compose(compose(Ts, P), pie.A)
    lhs = X + adjoint(X) + compose(Ts, pie.T).scale(delta)
    neg = _min_eig_proxy(-lhs, n, samples, rng)
    K = klin(compose_3pi_tensor(compose(Ts, P), pie.B)).K
    kmax = float(K.max_abs_coef())
    qmin = float(np.linalg.eigvalsh(cert.Q_P)[0]) if cert.Q_P.size else 0.0
    tt_top = float(symmetric_spectrum(compose(Ts, pie.T), n)[-1])  # ||T||^2
    rep = CheckReport(pos, neg, kmax, qmin, tol, float(delta) * tt_top)
    cert.residuals = rep.to_json()
    return rep


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    r_star: Fraction
    r_fail: Fraction
    history: list[tuple[float, str]]
    certificate: Certificate | None = None

    def to_json(self) -> dict:
        return {
            "r_star": float(self.r_star),
            "r_fail": float(self.r_fail),
            "history": [{"r": r, "verdict": v} for r, v in self.history],
        }


def certify(fam: StabilityFamily, r, backend: str = "CLARABEL", tol: float = 1e-6, return_problem: bool = False):
    """Solve and verify at one parameter value.

    Returns (verdict, certificate or None), plus the problem when
    ``return_problem`` is set.  The verdict is one of "certified",
    "check-failed", "infeasible" or "unknown".
    """
    prob = fam.problem(r)
    res = solve(prob, backend)
    if isinstance(res, Certificate):
        rep = check_certificate(res, prob.context.pie, tol)
        out = ("certified" if rep.passed else "check-failed", res)
    elif isinstance(res, Infeasible):
        out = ("infeasible", None)
    else:
        out = ("unknown", None)
    return out + (prob,) if return_problem else out


def sweep(
    family: Callable[[Fraction], PDESpec] | StabilityFamily,
    interval: tuple,
    degrees=DEFAULT_DEGREES,
    eps=DEFAULT_EPS,
    delta=DEFAULT_DELTA,
    tol_r: float = DEFAULT_TOL_R,
    backend: str = "CLARABEL",
    neg_extra: int = 0,
    klin_tol: float = 0.0,
) -> SweepResult:
    """Bisect between a certified ``interval[0]`` and an uncertified ``interval[1]``.

    ``interval[1]`` may lie on either side of ``interval[0]``.  Points that are
    infeasible, unknown or fail the certificate check all count as uncertified.
    """
    fam = family if isinstance(family, StabilityFamily) else StabilityFamily(
        family, degrees, eps, delta, neg_extra=neg_extra, klin_tol=klin_tol
    )
    lo, hi = to_fraction(interval[0]), to_fraction(interval[1])
    history = []
    v_lo, cert = certify(fam, lo, backend)
    history.append((float(lo), v_lo))
    if v_lo != "certified":
        raise SweepError(f"lower end r = {float(lo)} is not certified ({v_lo}); the bracket does not straddle the threshold")
    v_hi, _ = certify(fam, hi, backend)
    history.append((float(hi), v_hi))
    if v_hi == "certified":
        raise SweepError(f"upper end r = {float(hi)} is certified; widen the bracket")
    tol = to_fraction(tol_r)
    while abs(hi - lo) > tol:
        mid = (lo + hi) / 2
        # keep the midpoint short so exact arithmetic stays cheap
        mid = Fraction(mid).limit_denominator(int(4 / float(tol)) + 1)
        if mid == lo or mid == hi:
            break
        v, c = certify(fam, mid, backend)
        history.append((float(mid), v))
        log.info("r = %.6f: %s", float(mid), v)
        if v == "certified":
            lo, cert = mid, c
        else:
            hi = mid
    return SweepResult(lo, hi, history, cert)


# --------------------------------------------------------------------------
# SDPA interchange


def export_sdpa(prob: SDPProblem, path) -> None:
    """Write the SDPA sparse dual form: find Y >= 0 with tr(F_i Y) = c_i.

    Each equality row becomes one constraint matrix F_i (off-diagonal
    coefficients halved so that the symmetric pair adds up); F_0 = 0.
    """
    if prob.klin_tol > 0:
        raise ValueError("SDPA export needs an equality-only problem (klin_tol = 0)")
    A, rhs, _ = prob.float_system()
    A = A.tocsr()
    lines = [f"{len(prob.rows)} = mDIM", f"{len(prob.blocks)} = nBLOCK"]
    lines.append(" ".join(str(n) for _, n in prob.blocks) + " = bLOCKsTRUCT")
    lines.append(" ".join(repr(float(c)) for c in rhs))
    for r in range(A.shape[0]):
        start, end = A.indptr[r], A.indptr[r + 1]
        entries = sorted(zip(A.indices[start:end], A.data[start:end]))
        for k, c in entries:
            b, i, j = prob.var_index[k]
            val = c if i == j else c / 2
            lines.append(f"{r + 1} {b + 1} {i + 1} {j + 1} {float(val)!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class SDPAData:
    blocks: list[int]
    c: np.ndarray
    entries: list[tuple[int, int, int, int, float]]

    @property
    def m(self) -> int:
        return len(self.c)


def read_sdpa(path) -> SDPAData:
    """Read an SDPA sparse file (the subset written by :func:`export_sdpa`, plus comments)."""
    with open(path, encoding="ascii") as fh:
        raw = [ln.split('"')[0].split("*")[0].strip() for ln in fh]
    lines = [ln for ln in raw if ln]
    clean = lambda s: s.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " ")
    m = int(clean(lines[0]).split()[0])
    nb = int(clean(lines[1]).split()[0])
    blocks = [abs(int(x)) for x in clean(lines[2]).split()[:nb] if x.lstrip("-").isdigit()] if nb else []
    pos = 3
    c_tokens: list[float] = []
    while len(c_tokens) < m:
        c_tokens += [float(x) for x in clean(lines[pos]).split() if x not in ("=",)]
        pos += 1
    if m == 0 and pos < len(lines) and not clean(lines[pos]).split()[:1]:
        pos += 1
    entries = []
    for ln in lines[pos:]:
        parts = clean(ln).split()
        if len(parts) < 5:
            continue
        entries.append((int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])))
    return SDPAData(blocks, np.array(c_tokens[:m]), entries)


def solve_sdpa(data: SDPAData, backend: str = "SCS") -> str:
    """Feasibility status of an SDPA dual-form problem, solved independently of the assembly code."""
    import cvxpy as cp

    if not data.blocks:
        return "optimal"
    Y = [cp.Variable((n, n), symmetric=True) for n in data.blocks]
    exprs = [0] * data.m
    for r, b, i, j, v in data.entries:
        if r == 0:
            continue
        term = v * Y[b - 1][i - 1, j - 1] if i == j else 2 * v * Y[b - 1][i - 1, j - 1]
        exprs[r - 1] = exprs[r - 1] + term
    cons = [y >> 0 for y in Y]
    scale = np.ones(data.m)
    for r, b, i, j, v in data.entries:
        if r:
            scale[r - 1] = max(scale[r - 1] if scale[r - 1] != 1 else 0.0, abs(v))
    cons += [exprs[k] / scale[k] == data.c[k] / scale[k] for k in range(data.m) if not isinstance(exprs[k], int)]
    prob = cp.Problem(cp.Minimize(0), cons)
    try:
        prob.solve(solver=backend)
    except cp.error.SolverError as exc:
        return f"solver_error: {exc}"
    return prob.status
