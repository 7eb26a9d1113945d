"""Reference systems (reaction Burgers, modified KdV, modified KSE) and their fixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from scipy.optimize import bisect

from .pde2pie import PDESpec, assemble_pie, construct_maps
from .pialgebra import PIOp, identity, multiplier
from .polykernel import Poly, to_fraction
from .tensorpi import TensorPIOp, tensor_product

__all__ = [
    "NAMES",
    "Benchmark",
    "BENCHMARKS",
    "build",
    "burgers",
    "kdv",
    "kse",
    "fixture_kernels",
    "fixture_check",
    "FixtureReport",
    "kdv_condition",
    "kse_condition",
    "analytic_kdv_bound",
    "analytic_kse_bound",
]

P = Poly.from_text


def burgers(r) -> PDESpec:
    """u_t = u_ss + r u - u u_s on [0, 1], u(0) = u(1) = 0."""
    return PDESpec(
        2, (0, 1), (to_fraction(r), 0, 1), {(1, 0): -1},
        ((1, 0, 0, 0), (0, 0, 1, 0)),
    )


def kdv(r) -> PDESpec:
    """u_t = -u_sss + u (r u + 6 u_s) on [0, 1], u(0) = u(1) = u_s(1) = 0."""
    return PDESpec(
        3, (0, 1), (0, 0, 0, -1), {(0, 0): to_fraction(r), (1, 0): 6},
        ((1, 0, 0, 0, 0, 0), (0, 0, 0, 1, 0, 0), (0, 0, 0, 0, 1, 0)),
    )


def kse(r) -> PDESpec:
    """u_t = -u_ssss - u_ss - u (r u + u_s) on [0, 1], clamped at both ends."""
    return PDESpec(
        4, (0, 1), (0, 0, -1, 0, -1), {(0, 0): -to_fraction(r), (1, 0): -1},
        (
            (1, 0, 0, 0, 0, 0, 0, 0),
            (0, 1, 0, 0, 0, 0, 0, 0),
            (0, 0, 0, 0, 1, 0, 0, 0),
            (0, 0, 0, 0, 0, 1, 0, 0),
        ),
    )


@dataclass(frozen=True)
class Benchmark:
    name: str
    builder: Callable[[Fraction], PDESpec]
    threshold: tuple[float, float]  # certified range reported for the SDP method
    bracket: tuple[float, float]  # default sweep bracket(s): (certified, uncertified)
    lower_bracket: tuple[float, float] | None = None
    degrees: tuple[int, int] = (2, 2)  # monomial degrees of P used by the presets
    klin_tol: float = 0.0  # K_lin coefficient bound; 0 means exact
    neg_extra: int = 0


BENCHMARKS = {
    "burgers": Benchmark("burgers", burgers, (-math.inf, 9.8696), (0.0, 12.0)),
    # exact cubic cancellation is impossible for r != 0 here, so K_lin is bounded instead
    "kdv": Benchmark("kdv", kdv, (0.0, 4.6098), (0.0, 6.0), degrees=(3, 3), klin_tol=1e-8),
    "kse": Benchmark("kse", kse, (-0.6500, 0.7202), (0.0, 3.0), (0.0, -3.0), degrees=(3, 3), klin_tol=1e-8),
}
NAMES = tuple(BENCHMARKS)


def build(name: str, r) -> PDESpec:
    try:
        return BENCHMARKS[name].builder(to_fraction(r))
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {', '.join(NAMES)}") from None


def fixture_kernels() -> dict[str, dict[str, PIOp]]:
    """Reference kernels for each system, written out by hand."""
    return {
        "burgers": {
            "T": PIOp(0, P("(s-1)*th"), P("s*(th-1)")),
            "R1": PIOp(0, P("th"), P("th-1")),
        },
        "kdv": {
            "T": PIOp(0, P("1/2*(s-1)^2*th^2"), P("1/2*(s-1)^2*th^2 - 1/2*(s-th)^2")),
            "R1": PIOp(0, P("(s-1)*th^2"), P("(s-1)*th^2 - (s-th)")),
        },
        "kse": {
            "T": PIOp(
                0,
                P("-1/6*(s-1)^2*th^2*(2*s*th - 3*s + th)"),
                P("-1/6*(th-1)^2*s^2*(2*s*th - 3*th + s)"),
            ),
            "R1": PIOp(
                0,
                P("-1/2*(s-1)*th^2*(2*s*th - 3*s + 1)"),
                P("-1/2*s*(th-1)^2*(2*s*th + s - 2*th)"),
            ),
            "R2": PIOp(
                0,
                P("-th^2*(2*s*th - 3*s - th + 2)"),
                P("-(th-1)^2*(2*s*th + s - th)"),
            ),
        },
    }


def fixture_blocks(name: str, r) -> tuple[PIOp, TensorPIOp]:
    """The (A, B) pair written in terms of the reference T and R kernels."""
    r = to_fraction(r)
    fx = fixture_kernels()[name]
    T, R1 = fx["T"], fx["R1"]
    if name == "burgers":
        return identity() + T.scale(r), -tensor_product(T, R1)
    if name == "kdv":
        return -identity(), tensor_product(T, T.scale(r) + R1.scale(6))
    if name == "kse":
        # the -u_ssss term contributes -I
        return -identity() - fx["R2"], -tensor_product(T, T.scale(r) + R1)
    raise ValueError(f"unknown benchmark {name!r}")


@dataclass
class FixtureReport:
    mismatches: list[str]
    checked: list[str]

    @property
    def passed(self) -> bool:
        return not self.mismatches


def fixture_check(r=1) -> FixtureReport:
    """Exact comparison of constructed maps and PIE blocks against the fixtures."""
    mismatches, checked = [], []
    for name, kernels in fixture_kernels().items():
        spec = build(name, r)
        maps = construct_maps(spec)
        for key, op in kernels.items():
            j = 0 if key == "T" else int(key[1:])
            for slot, got, want in (("R0", maps[j].r0, op.r0), ("R1", maps[j].r1, op.r1), ("R2", maps[j].r2, op.r2)):
                label = f"{name}.{key}.{slot}"
                checked.append(label)
                if got != want:
                    mismatches.append(f"{label}: constructed {got} but fixture has {want}")
        pie = assemble_pie(spec)
        A, B = fixture_blocks(name, r)
        checked += [f"{name}.A", f"{name}.B"]
        if pie.A != A:
            mismatches.append(f"{name}.A differs from the fixture block")
        if pie.B != B:
            mismatches.append(f"{name}.B differs from the fixture block")
    return FixtureReport(mismatches, checked)


def kdv_condition(r: float) -> float:
    return r * r * math.exp(r / 2) - 12 * math.pi**2


def kse_condition(r: float) -> float:
    return math.exp(3 * r) * (18 * r * r + 1) - math.pi**2


def analytic_kdv_bound() -> float:
    """Root of r^2 e^{r/2} = 12 pi^2 on [0, 10]."""
    return bisect(kdv_condition, 0.0, 10.0, xtol=1e-10)


def analytic_kse_bound() -> float:
    """Root of e^{3r} (18 r^2 + 1) = pi^2 on [0, 2]."""
    return bisect(kse_condition, 0.0, 2.0, xtol=1e-10)
