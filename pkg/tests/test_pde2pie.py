import json
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from quadpie.benchmarks import burgers, fixture_check, kdv, kse
from quadpie.pde2pie import (
    IllPosed,
    PDESpec,
    SpecError,
    assemble_pie,
    check_wellposed,
    construct_maps,
    pde_rhs,
)
from quadpie.pialgebra import apply
from quadpie.polykernel import S, Poly
from quadpie.tensorpi import apply_tensor, tensor_state
from strategies import polys

P = Poly.from_text


def derivs_of(u: Poly, n: int) -> list[Poly]:
    out = [u]
    for _ in range(n):
        out.append(out[-1].partial(S))
    return out


def boundary_values(spec: PDESpec, u: Poly) -> list[Fraction]:
    d = derivs_of(u, spec.order - 1)
    a, b = spec.domain.a, spec.domain.b
    vals = [p.eval({S: a}) for p in d] + [p.eval({S: b}) for p in d]
    return [sum(Fraction(c) * Fraction(x) for c, x in zip(row, vals)) for row in spec.bc]


@pytest.mark.parametrize("r", [1, Fraction(3, 2), -2])
def test_fixtures_match(r):
    rep = fixture_check(r)
    assert rep.passed, rep.mismatches
    assert len(rep.checked) == 7 * 3 + 3 * 2  # seven kernels, A and B per system


def test_wellposed_examples():
    assert check_wellposed(burgers(1))
    neumann = PDESpec(2, (0, 1), (0, 0, 1), {}, ((0, 1, 0, 0), (0, 0, 0, 1)))
    periodic = PDESpec(2, (0, 1), (0, 0, 1), {}, ((1, 0, -1, 0), (0, 1, 0, -1)))
    rank_deficient = PDESpec(2, (0, 1), (0, 0, 1), {}, ((1, 0, 0, 0), (2, 0, 0, 0)))
    for spec in (neumann, periodic, rank_deficient):
        assert not check_wellposed(spec)
        with pytest.raises(IllPosed):
            construct_maps(spec)
    robin = PDESpec(2, (0, 1), (0, 0, 1), {}, ((1, -1, 0, 0), (0, 0, 1, 1)))
    assert check_wellposed(robin)


@pytest.mark.parametrize("spec", [burgers(2), kdv(1), kse(Fraction(1, 2))], ids=["burgers", "kdv", "kse"])
def test_reconstruction(spec):
    N = spec.order
    maps = construct_maps(spec)
    for v in (Poly.one(), P("s^3 - 2*s"), P("5*s^2 + 1/7")):
        u = apply(maps[0], v)
        assert all(x == 0 for x in boundary_values(spec, u))
        d = derivs_of(u, N)
        assert d[N] == v
        for j in range(N):
            assert apply(maps[j], v) == d[j]


@pytest.mark.parametrize("spec", [burgers(3), kdv(2), kse(-1)], ids=["burgers", "kdv", "kse"])
def test_pie_matches_pde(spec):
    pie = assemble_pie(spec)
    for v in (P("s"), P("s^2 - 1/3"), P("2 - s^3")):
        lhs = apply(pie.A, v) + apply_tensor(pie.B, tensor_state(v))
        rhs = pde_rhs(spec, derivs_of(apply(pie.T, v), spec.order))
        assert lhs == rhs


bc_entries = st.sampled_from([0, 0, 0, 1, -1, 2, Fraction(1, 2)])


@settings(max_examples=30)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.lists(bc_entries, min_size=2 * n, max_size=2 * n), min_size=n, max_size=n),
)), polys(1, 3))
def test_random_boundary_conditions(case, v):
    n, bc = case
    spec = PDESpec(n, (0, 2), (0,) * n + (1,), {}, tuple(map(tuple, bc)))
    if not check_wellposed(spec):
        with pytest.raises(IllPosed):
            construct_maps(spec)
        return
    maps = construct_maps(spec)
    u = apply(maps[0], v)
    assert all(x == 0 for x in boundary_values(spec, u))
    d = derivs_of(u, n)
    assert d[n] == v
    for j in range(n):
        assert apply(maps[j], v) == d[j]


@settings(max_examples=15)
@given(polys(1, 1, 2), polys(1, 1, 2), polys(1, 2))
def test_quadratic_terms_on_shifted_domain(c0, c1, v):
    assume(v)
    spec = PDESpec(
        2, (Fraction(-1, 2), 1), (c0, 0, 1), {(1, 0): c1, (0, 0): 1},
        ((1, 0, 0, 0), (0, 0, 1, 0)),
    )
    pie = assemble_pie(spec)
    lhs = apply(pie.A, v) + apply_tensor(pie.B, tensor_state(v))
    assert lhs == pde_rhs(spec, derivs_of(apply(pie.T, v), 2))


def test_json_round_trip(tmp_path):
    spec = kse(Fraction(-2, 3))
    again = PDESpec.from_json(json.dumps(spec.to_json()))
    assert again == spec
    path = tmp_path / "kse.json"
    path.write_text(json.dumps(spec.to_json()))
    assert PDESpec.load(path) == spec


@pytest.mark.parametrize(
    "data, field",
    [
        ("{not json", "line 1"),
        ([1, 2], "top level"),
        ({"domain": [0, 1], "alpha": [0, 0, 1], "bc": []}, "order"),
        ({"order": 0, "domain": [0, 1], "alpha": [1], "bc": []}, "order"),
        ({"order": 2, "domain": [0, 1], "alpha": [0, 1], "bc": [[1, 0, 0, 0], [0, 0, 1, 0]]}, "alpha"),
        ({"order": 2, "domain": [0, 1], "alpha": [0, 0, "th"], "bc": [[1, 0, 0, 0], [0, 0, 1, 0]]}, "alpha[2]"),
        ({"order": 2, "domain": [0, 1], "alpha": [0, 0, "s +"], "bc": [[1, 0, 0, 0], [0, 0, 1, 0]]}, "alpha[2]"),
        ({"order": 2, "domain": [1, 0], "alpha": [0, 0, 1], "bc": [[1, 0, 0, 0], [0, 0, 1, 0]]}, "domain"),
        ({"order": 2, "domain": [0, "x"], "alpha": [0, 0, 1], "bc": [[1, 0, 0, 0], [0, 0, 1, 0]]}, "domain[1]"),
        ({"order": 2, "domain": [0, 1], "alpha": [0, 0, 1], "bc": [[1, 0, 0], [0, 0, 1, 0]]}, "bc"),
        ({"order": 2, "domain": [0, 1], "alpha": [0, 0, 1], "bc": [[1, 0, 0, True], [0, 0, 1, 0]]}, "bc[0][3]"),
        ({"order": 2, "domain": [0, 1], "alpha": [0, 0, 1], "beta": [[2, 0, 1]], "bc": [[1, 0, 0, 0], [0, 0, 1, 0]]}, "beta[2,0]"),
        ({"order": 2, "domain": [0, 1], "alpha": [0, 0, 1], "beta": [[1, 0]], "bc": [[1, 0, 0, 0], [0, 0, 1, 0]]}, "beta[0]"),
    ],
)
def test_spec_errors_name_the_field(data, field):
    with pytest.raises(SpecError, match=field.replace("[", r"\[").replace("]", r"\]")):
        PDESpec.from_json(json.dumps(data) if not isinstance(data, str) else data)
