import math

import pytest

from quadpie.benchmarks import (
    BENCHMARKS,
    NAMES,
    analytic_kdv_bound,
    analytic_kse_bound,
    build,
    fixture_blocks,
    kdv_condition,
    kse_condition,
)
from quadpie.pde2pie import assemble_pie, check_wellposed
from quadpie.selftest import run_selftest


def test_names_and_build():
    assert NAMES == ("burgers", "kdv", "kse")
    for name in NAMES:
        spec = build(name, "1/3")
        assert check_wellposed(spec)
        assert spec.order == {"burgers": 2, "kdv": 3, "kse": 4}[name]
    with pytest.raises(ValueError, match="unknown benchmark"):
        build("heat", 1)


def test_presets_are_consistent():
    for b in BENCHMARKS.values():
        lo, hi = b.threshold
        assert lo < hi
        assert b.klin_tol >= 0 and min(b.degrees) >= 0
    assert BENCHMARKS["burgers"].klin_tol == 0


@pytest.mark.parametrize("name", NAMES)
def test_blocks_follow_parameter(name):
    for r in (0, 2):
        pie = assemble_pie(build(name, r))
        A, B = fixture_blocks(name, r)
        assert pie.A == A and pie.B == B


def test_analytic_bounds():
    rk = analytic_kdv_bound()
    rs = analytic_kse_bound()
    assert abs(kdv_condition(rk)) < 1e-6 and abs(kse_condition(rs)) < 1e-6
    assert rk**2 * math.exp(rk / 2) == pytest.approx(12 * math.pi**2)
    # conditions change sign exactly once on the search intervals
    assert kdv_condition(0) < 0 < kdv_condition(10)
    assert kse_condition(0) < 0 < kse_condition(2)


def test_selftest_passes():
    checks = run_selftest(instances=5, seed=3)
    assert checks and all(c.passed for c in checks), [c.failures for c in checks if not c.passed]
