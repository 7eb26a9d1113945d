"""Exact multivariate polynomials in the kernel variables s, th, et, ze.

Every operator kernel in the package is a :class:`Poly`.  Coefficients are
arbitrary precision rationals (``gmpy2.mpq``) so that coefficient matching
downstream never drifts.  Exponent tuples are packed into a single integer
(16 bits per variable) which keeps multiplication a dictionary merge over
integer sums.
"""

from __future__ import annotations

import re
from enum import IntEnum
from fractions import Fraction
from typing import Iterable, Mapping, Union

import numpy as np
from gmpy2 import mpq

__all__ = [
    "Var",
    "Poly",
    "Rational",
    "to_rational",
    "to_fraction",
    "arith",
    "integrate",
    "substitute",
    "permute",
    "evaluate",
    "S",
    "TH",
    "ET",
    "ZE",
]


class Var(IntEnum):
    """Kernel variables, ordered s > th > et > ze for canonical printing."""

    S = 0
    TH = 1
    ET = 2
    ZE = 3

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = ("s", "th", "et", "ze")
_ALIASES = {
    "s": Var.S,
    "th": Var.TH,
    "theta": Var.TH,
    "θ": Var.TH,
    "et": Var.ET,
    "eta": Var.ET,
    "η": Var.ET,
    "ze": Var.ZE,
    "zeta": Var.ZE,
    "ζ": Var.ZE,
}

_NV = 4
_SHIFT = 16
_MASK = (1 << _SHIFT) - 1
_ONE = [1 << (_SHIFT * v) for v in range(_NV)]

Rational = Union[int, Fraction, "mpq"]
_MPQ = type(mpq(0))


def to_rational(x) -> mpq:
    """Convert ints, Fractions, mpq, decimal/fraction strings or floats to mpq.

    Floats are converted exactly (binary expansion), never rounded.
    """
    if isinstance(x, _MPQ):
        return x
    if isinstance(x, (int, np.integer)):
        return mpq(int(x))
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, (float, np.floating)):
        f = Fraction(float(x))
        return mpq(f.numerator, f.denominator)
    if isinstance(x, str):
        f = Fraction(x.strip())
        return mpq(f.numerator, f.denominator)
    if isinstance(x, Poly):
        if x.degree() > 0:
            raise ValueError(f"expected a constant, got {x}")
        return x.constant()
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def to_fraction(x) -> Fraction:
    q = to_rational(x)
    return Fraction(int(q.numerator), int(q.denominator))


def _pack(exps: Iterable[int]) -> int:
    key = 0
    for v, e in enumerate(exps):
        if e < 0 or e > _MASK:
            raise ValueError(f"exponent {e} out of range")
        key |= int(e) << (_SHIFT * v)
    return key


def _unpack(key: int) -> tuple[int, int, int, int]:
    return (
        key & _MASK,
        (key >> _SHIFT) & _MASK,
        (key >> (2 * _SHIFT)) & _MASK,
        (key >> (3 * _SHIFT)) & _MASK,
    )


def _exp(key: int, v: int) -> int:
    return (key >> (_SHIFT * v)) & _MASK


def _as_var(v) -> Var:
    if isinstance(v, Var):
        return v
    if isinstance(v, str):
        try:
            return _ALIASES[v]
        except KeyError:
            raise ValueError(f"unknown variable {v!r}") from None
    if isinstance(v, Poly):
        w = _single_var(v)
        if w is None:
            raise ValueError(f"expected a single variable, got {v}")
        return w
    return Var(v)


class Poly:
    """Immutable polynomial with exact rational coefficients.

    ``Poly({(2, 1, 0, 0): Fraction(1, 2)})`` is ``s^2 th / 2``.  The public
    :attr:`terms` mapping is keyed by exponent 4-tuples in (s, th, et, ze)
    order; zero coefficients are never stored.
    """

    __slots__ = ("_t", "_hash")

    def __init__(self, terms: Mapping | None = None):
        t: dict[int, mpq] = {}
        if terms:
            for k, c in terms.items():
                key = k if isinstance(k, int) else _pack(k)
                c = to_rational(c)
                if c:
                    t[key] = t.get(key, 0) + c
                    if not t[key]:
                        del t[key]
        self._t = t
        self._hash = None

    @classmethod
    def _raw(cls, t: dict) -> "Poly":
        p = cls.__new__(cls)
        p._t = t
        p._hash = None
        return p

    # -- constructors -------------------------------------------------
    @classmethod
    def const(cls, c) -> "Poly":
        c = to_rational(c)
        return cls._raw({0: c} if c else {})

    @classmethod
    def var(cls, v) -> "Poly":
        return cls._raw({_ONE[_as_var(v)]: mpq(1)})

    @classmethod
    def monomial(cls, exps: Iterable[int], coef=1) -> "Poly":
        return cls({tuple(exps): coef})

    @staticmethod
    def zero() -> "Poly":
        return _ZERO

    @staticmethod
    def one() -> "Poly":
        return _ONE_POLY

    # -- inspection ---------------------------------------------------
    @property
    def terms(self) -> dict[tuple[int, int, int, int], Fraction]:
        return {_unpack(k): to_fraction(c) for k, c in self._t.items()}

    def items(self):
        """(exponent tuple, mpq) pairs in canonical order."""
        for k in sorted(self._t, key=_sort_key):
            yield _unpack(k), self._t[k]

    def is_zero(self) -> bool:
        return not self._t

    def __bool__(self) -> bool:
        return bool(self._t)

    def __len__(self) -> int:
        return len(self._t)

    def constant(self) -> mpq:
        return self._t.get(0, mpq(0))

    def coefficient(self, exps: Iterable[int]) -> mpq:
        return self._t.get(_pack(exps), mpq(0))

    def degree(self) -> int:
        if not self._t:
            return -1
        return max(sum(_unpack(k)) for k in self._t)

    def degree_in(self, v) -> int:
        v = _as_var(v)
        if not self._t:
            return -1
        return max(_exp(k, v) for k in self._t)

    def variables(self) -> set[Var]:
        present = 0
        for k in self._t:
            present |= k
        return {Var(v) for v in range(_NV) if (present >> (_SHIFT * v)) & _MASK}

    def max_abs_coef(self) -> Fraction:
        if not self._t:
            return Fraction(0)
        return to_fraction(max(abs(c) for c in self._t.values()))

    # -- ring operations ---------------------------------------------
    def __add__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.const(other)
        if len(other._t) > len(self._t):
            a, b = other._t, self._t
        else:
            a, b = self._t, other._t
        out = dict(a)
        for k, c in b.items():
            v = out.get(k)
            if v is None:
                out[k] = c
            else:
                v = v + c
                if v:
                    out[k] = v
                else:
                    del out[k]
        return Poly._raw(out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly._raw({k: -c for k, c in self._t.items()})

    def __sub__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.const(other)
        return self + (-other)

    def __rsub__(self, other) -> "Poly":
        return Poly.const(other) - self

    def scale(self, c) -> "Poly":
        c = to_rational(c)
        if not c:
            return _ZERO
        return Poly._raw({k: v * c for k, v in self._t.items()})

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            return self.scale(other)
        a, b = self._t, other._t
        if not a or not b:
            return _ZERO
        if len(a) < len(b):
            a, b = b, a
        out: dict[int, mpq] = {}
        get = out.get
        for k2, c2 in b.items():
            for k1, c1 in a.items():
                k = k1 + k2
                out[k] = get(k, 0) + c1 * c2
        return Poly._raw({k: c for k, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative power")
        result, base = _ONE_POLY, self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self._t == other._t
        try:
            c = to_rational(other)
        except TypeError:
            return NotImplemented
        return self._t == ({0: c} if c else {})

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._t.items()))
        return self._hash

    # -- calculus -----------------------------------------------------
    def partial(self, v, order: int = 1) -> "Poly":
        """Partial derivative with respect to ``v``."""
        v = _as_var(v)
        p = self
        for _ in range(order):
            one = _ONE[v]
            out = {}
            for k, c in p._t.items():
                e = _exp(k, v)
                if e:
                    out[k - one] = c * e
            p = Poly._raw(out)
        return p

    def integrate(self, v, lower, upper) -> "Poly":
        """Definite integral over ``v`` from ``lower`` to ``upper``.

        Limits must be a rational constant or a single other variable
        (given as :class:`Var`, a name, or a degree-one monomial Poly).
        """
        v = _as_var(v)
        lo = _limit(lower, v)
        hi = _limit(upper, v)
        sv = _SHIFT * v
        out: dict[int, mpq] = {}
        get = out.get
        for k, c in self._t.items():
            e = (k >> sv) & _MASK
            base = k - (e << sv)
            e1 = e + 1
            cc = c / e1
            for lim, sign in ((hi, 1), (lo, -1)):
                kind, val = lim
                if kind == "c":
                    if val:
                        kk = base
                        add = cc * val**e1
                    else:
                        continue
                else:
                    kk = base + (e1 << (_SHIFT * val))
                    add = cc
                out[kk] = get(kk, 0) + (add if sign > 0 else -add)
        return Poly._raw({k: c for k, c in out.items() if c})

    # -- substitution ---------------------------------------------------
    def substitute(self, v, repl) -> "Poly":
        """Replace variable ``v`` by ``repl`` (a rational, a variable or a Poly)."""
        v = _as_var(v)
        sv = _SHIFT * v
        if isinstance(repl, (Var, str)):
            return self.permute({v: _as_var(repl)})
        if not isinstance(repl, Poly):
            repl = Poly.const(repl)
        single = _single_var(repl)
        if single is not None:
            return self.permute({v: single})
        if repl.degree() <= 0:
            c = repl.constant()
            out: dict[int, mpq] = {}
            for k, coef in self._t.items():
                e = (k >> sv) & _MASK
                kk = k - (e << sv)
                out[kk] = out.get(kk, 0) + coef * c**e
            return Poly._raw({k: x for k, x in out.items() if x})
        powers = {0: _ONE_POLY}
        acc = _ZERO
        groups: dict[int, dict[int, mpq]] = {}
        for k, coef in self._t.items():
            e = (k >> sv) & _MASK
            groups.setdefault(e, {})[k - (e << sv)] = coef
        for e in sorted(groups):
            if e not in powers:
                powers[e] = repl**e
            acc = acc + Poly._raw(groups[e]) * powers[e]
        return acc

    def permute(self, mapping: Mapping) -> "Poly":
        """Simultaneous variable renaming, e.g. ``{S: TH, TH: S}`` swaps s and th."""
        m = {_as_var(a): _as_var(b) for a, b in mapping.items()}
        target = [m.get(Var(v), Var(v)) for v in range(_NV)]
        out: dict[int, mpq] = {}
        for k, c in self._t.items():
            kk = 0
            for v in range(_NV):
                e = (k >> (_SHIFT * v)) & _MASK
                if e:
                    kk += e << (_SHIFT * target[v])
            out[kk] = out.get(kk, 0) + c
        return Poly._raw({k: c for k, c in out.items() if c})

    # -- evaluation ---------------------------------------------------
    def eval(self, point: Mapping) -> Fraction:
        """Exact value at a point; every occurring variable must be assigned."""
        vals = {_as_var(k): to_rational(x) for k, x in point.items()}
        missing = self.variables() - set(vals)
        if missing:
            names = ", ".join(sorted(v.label for v in missing))
            raise ValueError(f"no value given for {names}")
        total = mpq(0)
        for k, c in self._t.items():
            term = c
            for v in range(_NV):
                e = (k >> (_SHIFT * v)) & _MASK
                if e:
                    term *= vals[Var(v)] ** e
            total += term
        return to_fraction(total)

    def eval_float(self, **arrays) -> np.ndarray:
        """Vectorized float evaluation, e.g. ``p.eval_float(s=x, th=y)``."""
        vals = {_as_var(k): np.asarray(a, dtype=float) for k, a in arrays.items()}
        missing = self.variables() - set(vals)
        if missing:
            names = ", ".join(sorted(v.label for v in missing))
            raise ValueError(f"no value given for {names}")
        shape = np.broadcast_shapes(*(a.shape for a in vals.values())) if vals else ()
        out = np.zeros(shape)
        cache: dict[tuple[int, int], np.ndarray] = {}
        for k, c in self._t.items():
            term = np.full(shape, float(c))
            for v in range(_NV):
                e = (k >> (_SHIFT * v)) & _MASK
                if e:
                    key = (v, e)
                    if key not in cache:
                        cache[key] = vals[Var(v)] ** e
                    term = term * cache[key]
            out = out + term
        return out

    # -- text form ----------------------------------------------------
    def to_text(self) -> str:
        if not self._t:
            return "0"
        parts = []
        for exps, c in self.items():
            mono = " ".join(
                f"{_LABELS[v]}^{e}" for v, e in enumerate(exps) if e
            )
            neg = c < 0
            mag = -c if neg else c
            coef = _fmt(mag)
            body = coef if not mono else f"{coef} * {mono}"
            if not parts:
                parts.append(f"-{body}" if neg else body)
            else:
                parts.append(f"- {body}" if neg else f"+ {body}")
        return " ".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "Poly":
        return _parse(text)

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"Poly({self.to_text()!r})"


def _fmt(q: mpq) -> str:
    if q.denominator == 1:
        return str(int(q.numerator))
    return f"{int(q.numerator)}/{int(q.denominator)}"


def _sort_key(k: int):
    e = _unpack(k)
    return (-sum(e), tuple(-x for x in e))


def _single_var(p: Poly):
    if len(p._t) == 1:
        (k, c), = p._t.items()
        if c == 1:
            e = _unpack(k)
            if sum(e) == 1:
                return Var(e.index(1))
    return None


def _limit(lim, v: Var):
    if isinstance(lim, (Var, str)) and not _is_number_text(lim):
        w = _as_var(lim)
    elif isinstance(lim, Poly):
        w = _single_var(lim)
        if w is None:
            if lim.degree() <= 0:
                return ("c", lim.constant())
            raise ValueError(
                f"unsupported integration limit {lim}; use a constant or a single variable"
            )
    else:
        return ("c", to_rational(lim))
    if w == v:
        raise ValueError("integration limit coincides with the integration variable")
    return ("v", int(w))


def _is_number_text(x) -> bool:
    return isinstance(x, str) and not isinstance(x, Var) and bool(
        re.fullmatch(r"\s*[-+]?\d+(\.\d*)?(/\d+)?\s*", x)
    )


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<var>theta|zeta|eta|th|et|ze|s|θ|η|ζ)"
    r"|(?P<op>[-+*/^()]))"
)


def _parse(text: str) -> Poly:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse polynomial at column {pos}: {text[pos:pos + 10]!r}")
        if m.group("num"):
            tokens.append(("num", m.group("num")))
        elif m.group("var"):
            tokens.append(("var", m.group("var")))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    if not tokens:
        raise ValueError("empty polynomial text")
    parser = _Parser(tokens, text)
    result = parser.expr()
    if parser.i != len(tokens):
        raise ValueError(f"unexpected token {tokens[parser.i][1]!r} in {text!r}")
    return result


class _Parser:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.i = 0
        self.text = text

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expr(self) -> Poly:
        acc = _ZERO
        sign = 1
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            sign = -1 if val == "-" else 1
        acc = self.term().scale(sign)
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                t = self.term()
                acc = acc + t if val == "+" else acc - t
            else:
                return acc

    def term(self) -> Poly:
        acc = self.power()
        while True:
            kind, val = self.peek()
            if kind == "op" and val == "*":
                self.take()
                acc = acc * self.power()
            elif kind == "op" and val == "/":
                self.take()
                d = self.power()
                if d.degree() > 0 or not d:
                    raise ValueError(f"can only divide by a nonzero number in {self.text!r}")
                acc = acc.scale(1 / d.constant())
            elif kind in ("num", "var") or (kind == "op" and val == "("):
                acc = acc * self.power()
            else:
                return acc

    def power(self) -> Poly:
        base = self.atom()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.take()
            k2, v2 = self.take()
            if k2 != "num" or not v2.isdigit():
                raise ValueError(f"exponent must be a non-negative integer in {self.text!r}")
            return base ** int(v2)
        return base

    def atom(self) -> Poly:
        kind, val = self.take()
        if kind == "num":
            return Poly.const(val)
        if kind == "var":
            return Poly.var(val)
        if kind == "op" and val == "(":
            inner = self.expr()
            k2, v2 = self.take()
            if v2 != ")":
                raise ValueError(f"missing ')' in {self.text!r}")
            return inner
        if kind == "op" and val == "-":
            return -self.atom()
        raise ValueError(f"unexpected token {val!r} in {self.text!r}")


_ZERO = Poly._raw({})
_ONE_POLY = Poly._raw({0: mpq(1)})

S = Poly.var(Var.S)
TH = Poly.var(Var.TH)
ET = Poly.var(Var.ET)
ZE = Poly.var(Var.ZE)


def arith(p, q, kind: str) -> Poly:
    """``kind`` is one of add, sub, mul, scale (``q`` a rational for scale)."""
    if kind == "add":
        return p + q
    if kind == "sub":
        return p - q
    if kind == "mul":
        return p * q
    if kind == "scale":
        return p.scale(q)
    raise ValueError(f"unknown arithmetic kind {kind!r}")


def integrate(p: Poly, v, lower, upper) -> Poly:
    return p.integrate(v, lower, upper)


def substitute(p: Poly, v, repl) -> Poly:
    return p.substitute(v, repl)


def permute(p: Poly, mapping: Mapping) -> Poly:
    return p.permute(mapping)


def evaluate(p: Poly, point: Mapping) -> Fraction:
    return p.eval(point)
