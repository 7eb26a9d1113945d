"""From a scalar quadratic PDE with linear boundary conditions to its PIE.

The PDE on ``[a, b]`` is::

    u_t = sum_{i<=N} alpha_i(s) d^i u + sum_{j<=i<N} beta_ij(s) d^i u d^j u
    bc @ [u(a), ..., d^{N-1}u(a), u(b), ..., d^{N-1}u(b)] = 0

With ``v = d^N u`` the boundary conditions are absorbed into 2-PI maps
``d^j u = R_j v`` and the PDE becomes ``d/dt T v = A v + B[v (x) v]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Mapping, Sequence

import sympy

from .pialgebra import Interval, PIOp, compose, identity, multiplier
from .polykernel import Poly, Var, to_fraction
from .tensorpi import TensorPIOp, compose_3pi_tensor, tensor_product

__all__ = [
    "SpecError",
    "IllPosed",
    "PDESpec",
    "PIESpec",
    "BoundaryReduction",
    "boundary_reduction",
    "check_wellposed",
    "construct_maps",
    "assemble_pie",
    "pde_rhs",
]

S, TH = Var.S, Var.TH


class SpecError(ValueError):
    """Malformed PDE description; the message names the offending field."""


class IllPosed(ValueError):
    """Boundary conditions do not determine u from its N-th derivative."""


@dataclass(frozen=True)
class PDESpec:
    order: int
    domain: Interval
    alpha: tuple[Poly, ...]
    beta: Mapping[tuple[int, int], Poly]
    bc: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        N = self.order
        if not isinstance(N, int) or N < 1:
            raise SpecError(f"order: expected an integer >= 1, got {N!r}")
        object.__setattr__(self, "domain", Interval.of(self.domain))
        alpha = tuple(_poly(x, f"alpha[{k}]") for k, x in enumerate(self.alpha))
        if len(alpha) != N + 1:
            raise SpecError(f"alpha: expected {N + 1} coefficients, got {len(alpha)}")
        beta = {}
        for (i, j), p in dict(self.beta).items():
            if not (0 <= j <= i <= N - 1):
                raise SpecError(f"beta[{i},{j}]: need 0 <= j <= i <= {N - 1}")
            p = _poly(p, f"beta[{i},{j}]")
            if p:
                beta[(i, j)] = beta.get((i, j), Poly.zero()) + p
        bc = tuple(tuple(to_fraction(x) for x in row) for row in self.bc)
        if len(bc) != N or any(len(row) != 2 * N for row in bc):
            raise SpecError(f"bc: expected a {N}x{2 * N} matrix")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", dict(sorted(beta.items())))
        object.__setattr__(self, "bc", bc)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "domain": self.domain.to_json(),
            "alpha": [p.to_text() for p in self.alpha],
            "beta": [[i, j, p.to_text()] for (i, j), p in self.beta.items()],
            "bc": [[str(x) for x in row] for row in self.bc],
        }

    @classmethod
    def from_json(cls, data) -> "PDESpec":
        if isinstance(data, (str, bytes)):
            try:
                data = json.loads(data)
            except json.JSONDecodeError as exc:
                raise SpecError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise SpecError("top level must be an object")
        for key in ("order", "domain", "alpha", "bc"):
            if key not in data:
                raise SpecError(f"{key}: missing field")
        try:
            domain = Interval.of([_frac(x, f"domain[{k}]") for k, x in enumerate(data["domain"])])
        except (TypeError, ValueError) as exc:
            raise SpecError(f"domain: {exc}") from None
        beta = {}
        for k, entry in enumerate(data.get("beta", [])):
            if not isinstance(entry, (list, tuple)) or len(entry) != 3:
                raise SpecError(f"beta[{k}]: expected [i, j, poly]")
            i, j, p = entry
            if not isinstance(i, int) or not isinstance(j, int):
                raise SpecError(f"beta[{k}]: indices must be integers")
            beta[(i, j)] = beta.get((i, j), Poly.zero()) + _poly(p, f"beta[{k}][2]")
        bc = []
        for r, row in enumerate(data["bc"]):
            if not isinstance(row, (list, tuple)):
                raise SpecError(f"bc[{r}]: expected a list")
            bc.append([_frac(x, f"bc[{r}][{c}]") for c, x in enumerate(row)])
        if not isinstance(data["alpha"], (list, tuple)):
            raise SpecError("alpha: expected a list")
        return cls(data["order"], domain, tuple(data["alpha"]), beta, tuple(map(tuple, bc)))

    @classmethod
    def load(cls, path) -> "PDESpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _poly(x, where: str) -> Poly:
    try:
        if isinstance(x, Poly):
            p = x
        elif isinstance(x, str):
            p = Poly.from_text(x)
        else:
            p = Poly.const(x)
    except (ValueError, TypeError) as exc:
        raise SpecError(f"{where}: {exc}") from None
    if p.variables() - {S}:
        raise SpecError(f"{where}: coefficient may depend on s only")
    return p


def _frac(x, where: str) -> Fraction:
    if isinstance(x, bool):
        raise SpecError(f"{where}: expected a rational number")
    try:
        return to_fraction(x)
    except (ValueError, TypeError, ZeroDivisionError):
        raise SpecError(f"{where}: expected a rational number, got {x!r}") from None


@dataclass(frozen=True)
class BoundaryReduction:
    M: tuple[tuple[Fraction, ...], ...]
    Lam: tuple[Poly, ...]
    BT: tuple[tuple[Fraction, ...], ...]


def boundary_reduction(spec: PDESpec) -> BoundaryReduction:
    N = spec.order
    a, b = spec.domain.a, spec.domain.b
    L = b - a
    M = tuple(
        tuple(L ** (k - j) / factorial(k - j) if k >= j else Fraction(0) for k in range(N))
        for j in range(N)
    )
    bth = Poly.const(b) - Poly.var(TH)
    Lam = tuple((bth ** (N - 1 - j)).scale(Fraction(1, factorial(N - 1 - j))) for j in range(N))
    Ba = [row[:N] for row in spec.bc]
    Bb = [row[N:] for row in spec.bc]
    BT = tuple(
        tuple(Ba[r][k] + sum(Bb[r][j] * M[j][k] for j in range(N)) for k in range(N))
        for r in range(N)
    )
    return BoundaryReduction(M, Lam, BT)


def _sym(rows) -> sympy.Matrix:
    return sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in rows])


def check_wellposed(spec: PDESpec) -> bool:
    """True iff ``bc`` has full row rank and ``B_a + B_b M`` is invertible."""
    if _sym(spec.bc).rank() < spec.order:
        return False
    return _sym(boundary_reduction(spec).BT).det() != 0


def construct_maps(spec: PDESpec) -> list[PIOp]:
    """2-PI maps ``R_0 .. R_{N-1}`` with ``d^j u = R_j v``; ``R_0`` is T."""
    if not check_wellposed(spec):
        raise IllPosed("boundary conditions do not determine u from v (B_a + B_b M is singular)")
    N = spec.order
    a = spec.domain.a
    red = boundary_reduction(spec)
    Bb = _sym([row[N:] for row in spec.bc])
    H = _sym(red.BT).inv() * Bb
    Hq = [[Fraction(int(H[i, j].p), int(H[i, j].q)) for j in range(N)] for i in range(N)]
    # w_k(th) = sum_l H_kl Lam_l(th)
    w = [
        sum((red.Lam[l].scale(Hq[k][l]) for l in range(N) if Hq[k][l]), Poly.zero())
        for k in range(N)
    ]
    s_a = Poly.var(S) - Poly.const(a)
    s_th = Poly.var(S) - Poly.var(TH)
    maps = []
    for j in range(N):
        c = Poly.zero()
        for k in range(j, N):
            if w[k]:
                c = c + (s_a ** (k - j)).scale(Fraction(1, factorial(k - j))) * w[k]
        taylor = (s_th ** (N - 1 - j)).scale(Fraction(1, factorial(N - 1 - j)))
        maps.append(PIOp(0, taylor - c, -c, spec.domain))
    return maps


@dataclass(frozen=True)
class PIESpec:
    T: PIOp
    Rj: tuple[PIOp, ...]
    A: PIOp
    B: TensorPIOp
    domain: Interval
    spec: PDESpec | None = field(default=None, compare=False)

    def to_json(self) -> dict:
        return {
            "domain": self.domain.to_json(),
            "T": self.T.to_json(),
            "Rj": [R.to_json() for R in self.Rj],
            "A": self.A.to_json(),
            "B": self.B.to_json(),
        }


def assemble_pie(spec: PDESpec) -> PIESpec:
    """``A = sum M_alpha_i R_i`` (with ``R_N = I``) and ``B = sum M_beta_ij (R_i (x) R_j)``."""
    Rj = construct_maps(spec)
    dom = spec.domain
    maps = list(Rj) + [identity(1, dom)]
    A = PIOp.zero((1, 1), dom)
    for i, al in enumerate(spec.alpha):
        if al:
            A = A + compose(multiplier(al, dom), maps[i])
    B = TensorPIOp.zero(dom)
    for (i, j), be in spec.beta.items():
        B = B + compose_3pi_tensor(multiplier(be, dom), tensor_product(Rj[i], Rj[j]))
    return PIESpec(Rj[0], tuple(Rj), A, B, dom, spec)


def pde_rhs(spec: PDESpec, derivs: Sequence[Poly]) -> Poly:
    """Evaluate the PDE right-hand side given ``derivs[i] = d^i u`` for i <= N."""
    out = Poly.zero()
    for i, al in enumerate(spec.alpha):
        if al:
            out = out + al * derivs[i]
    for (i, j), be in spec.beta.items():
        out = out + be * derivs[i] * derivs[j]
    return out
