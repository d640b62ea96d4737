import math

import numpy as np
import pytest

from elimtpl.arith import PrimeField, RealField
from elimtpl.groebner import groebner_with_syzygies
from elimtpl.basisgen import nonstandard_basis, sample_bases, standard_basis
from elimtpl.plan import plan_from_template
from elimtpl.poly import MonomialOrdering, mono_parse
from elimtpl.problems import builtin_fixtures
from elimtpl.templategen import (
    GenerateOptions,
    build_H0,
    build_V,
    build_param_template,
    generate,
    greedy_rowwise,
    materialize,
    prune_rows_cols,
    template_from_rows,
)
from elimtpl import solverun

FIX = builtin_fixtures()
NAMES2 = ["x", "y"]
S2, S3, S6 = math.sqrt(2), math.sqrt(3), math.sqrt(6)
EX3_SLOTS = {"c1": -S2, "c2": -3.0, "c3": -S3, "c4": 4.0}
EX2_SLOTS = {"c1": 1.0, "c2": -1.0, "c3": -1.0, "c4": -1.0}


def _published_cubic_line_plan():
    """The worked example's template: basis (x^2, y, 1), shifts {xf2, yf2, f2, f1}."""
    field = PrimeField()
    ordering = MonomialOrdering.grevlex(2)
    spec = FIX["cubic_line"]
    F, _ = spec.random_instance(field, seed=2)
    gb, _ = groebner_with_syzygies(F, ordering)
    basis = nonstandard_basis(gb, [(2, 0), (0, 1), (0, 0)], (1, 0))
    rows = [(1, (1, 0)), (1, (0, 1)), (1, (0, 0)), (0, (0, 0))]
    t = template_from_rows(rows, basis, F)
    return plan_from_template(t, spec, gb.d, field.p)


@pytest.fixture(scope="module")
def cubic_plan():
    return _published_cubic_line_plan()


def test_instantiate_published_matrix(cubic_plan):
    M = solverun.instantiate(cubic_plan, EX3_SLOTS)
    # Columns (y^2 | x^3, x*y, x | x^2, y, 1), canonical row order
    # (x*f2, y*f2, f1, f2).
    cols = [mono_parse(t, NAMES2) for t in ("y^2", "x^3", "x*y", "x", "x^2", "y", "1")]
    assert cubic_plan.columns == cols
    by_row = {km: i for i, km in enumerate(cubic_plan.rows)}
    expect = {
        (1, (1, 0)): [0, 0, -S3, 4, 1, 0, 0],
        (1, (0, 1)): [-S3, 0, 1, 0, 0, 4, 0],
        (1, (0, 0)): [0, 0, 0, 1, 0, -S3, 4],
        (0, (0, 0)): [-S2, 1, 0, 0, 0, 0, -3],
    }
    for km, row in expect.items():
        assert np.allclose(M[by_row[km]], row)


def test_instantiate_zero_data(cubic_plan):
    M = solverun.instantiate(cubic_plan, {"c1": 0.0, "c2": 0.0, "c3": 0.0, "c4": 0.0})
    # Only literal unit coefficients of the structure itself survive.
    assert np.isfinite(M).all()


def test_instantiate_missing_slot(cubic_plan):
    with pytest.raises(KeyError):
        solverun.instantiate(cubic_plan, {"c1": 1.0})


def test_instantiate_round_trip_random(cubic_plan):
    rng = np.random.default_rng(0)
    slots = {k: float(v) for k, v in zip(["c1", "c2", "c3", "c4"], rng.uniform(-2, 2, 4))}
    M = solverun.instantiate(cubic_plan, slots)
    F = solverun.instance_polys(cubic_plan, slots)
    for i, (k, m) in enumerate(cubic_plan.rows):
        shifted = F[k].mul_mono(m)
        for j, col in enumerate(cubic_plan.columns):
            assert M[i, j] == pytest.approx(shifted.coeff(col))


def test_action_matrix_example_two(cubic_plan):
    M = solverun.instantiate(cubic_plan, EX2_SLOTS)
    ar = solverun.action_from_template(M, cubic_plan)
    expected = np.array([[-1.0, 2.0, 2.0], [1.0, -1.0, -1.0], [0.0, 1.0, 1.0]])
    assert np.allclose(ar.T, expected, atol=1e-12)


def test_action_matrix_example_three(cubic_plan):
    # Exact entries derived by normal-form computation for the instance
    # {x^3 - sqrt2 y^2 - 3, x - sqrt3 y + 4} in basis (x^2, y, 1); the
    # published display of this matrix carries sign/constant typos but its
    # root list matches these values.
    M = solverun.instantiate(cubic_plan, EX3_SLOTS)
    ar = solverun.action_from_template(M, cubic_plan)
    expected = np.array(
        [
            [S2 / 3, 8 * S6 / 3, 3 - 16 * S2 / 3],
            [S3 / 3, 4.0, -16 * S3 / 3],
            [0.0, S3, -4.0],
        ]
    )
    assert np.allclose(ar.T, expected, atol=1e-10)


def test_roots_example_two(cubic_plan):
    sols = solverun.solve(cubic_plan, EX2_SLOTS)
    got = sorted((round(p[0].real, 6), round(p[1].real, 6)) for p in sols.points)
    assert got == [(-2.0, -3.0), (0.0, -1.0), (1.0, 0.0)]
    assert sols.residuals.max() < 1e-12


def test_roots_example_three(cubic_plan):
    sols = solverun.solve(cubic_plan, EX3_SLOTS)
    pts = sorted(sols.points.tolist(), key=lambda p: (round(p[0].imag, 6), p[0].real))
    conj_minus, real_root, conj_plus = pts
    assert real_root[0] == pytest.approx(2.955, abs=5e-4)
    assert real_root[1] == pytest.approx(4.015, abs=6e-4)
    assert conj_plus[0] == pytest.approx(-1.242 + 1.423j, abs=1e-3)
    assert conj_plus[1] == pytest.approx(1.592 + 0.822j, abs=1e-3)
    assert conj_minus[0] == pytest.approx(-1.242 - 1.423j, abs=1e-3)


def test_filter_real_only_example_three(cubic_plan):
    sols = solverun.solve(cubic_plan, EX3_SLOTS)
    feas = solverun.filter_roots(sols)
    assert len(feas) == 1
    assert feas.points[0][0].real == pytest.approx(2.955, abs=5e-4)


def test_nonradical_multiplicity_and_P_rows():
    plan, _ = generate(FIX["nonradical"], GenerateOptions(actions=["y"], seed=0))
    sols = solverun.solve(plan, {})
    assert sorted(sols.alg_mult) == [1, 1, 2, 2]
    # defective zero eigenvalue: geometric multiplicity one
    for a, g, w in zip(sols.alg_mult, sols.geo_mult, sols.eigenvalues):
        if a == 2:
            assert g == 1
            assert abs(w) < 1e-8
    got = sorted((round(p[0].real, 6), round(p[1].real, 6)) for p in sols.points)
    assert got == [(0.0, 0.0), (0.0, 0.0), (1.0, -1.0), (1.0, 1.0)]
    # Read-off appends binary rows for the shifted monomials staying basic.
    binary_rows = [j for kind, j in plan.readoff if kind == "B"]
    assert len(binary_rows) == 2


def test_residual_zero_at_exact_roots():
    plan, _ = generate(FIX["two_conics"], GenerateOptions(actions=["x"], seed=0))
    F = solverun.instance_polys(plan, {})
    pts = np.array([[0, 1], [0, -1], [1, 0], [-1, 0]], dtype=complex)
    assert solverun.residual_error(F, pts) < 1e-12


def test_residual_first_order_perturbation():
    plan, _ = generate(FIX["two_conics"], GenerateOptions(actions=["x"], seed=0))
    F = solverun.instance_polys(plan, {})
    pts = np.array([[0, 1 + 1e-6]], dtype=complex)
    err = solverun.residual_error(F, pts)
    assert 1e-8 < err < 1e-4


def test_filter_roots_clauses():
    plan, _ = generate(FIX["two_conics"], GenerateOptions(actions=["x"], seed=0))
    sols = solverun.solve(plan, {})
    clauses = solverun.parse_filters(["x>=0, y>0"], plan.var_names)
    feas = solverun.filter_roots(sols, clauses)
    assert len(feas) == 1 and feas.points[0][1].real == pytest.approx(1.0)
    rng_clauses = solverun.parse_filters(["-0.5<=x<=0.5"], plan.var_names)
    feas2 = solverun.filter_roots(sols, rng_clauses)
    assert len(feas2) == 2
    empty = solverun.filter_roots(sols.take([]))
    assert len(empty) == 0


def test_filter_keep_best_redundant():
    sols = solverun.SolutionSet(
        points=np.zeros((5, 2), dtype=complex),
        eigenvalues=np.zeros(5, dtype=complex),
        residuals=np.array([0.5, 0.01, 0.2, 0.003, 0.4]),
        alg_mult=[1] * 5,
        geo_mult=[1] * 5,
    )
    out = solverun.filter_roots(sols, keep_best=3)
    assert sorted(out.residuals.tolist()) == [0.003, 0.01, 0.2]


def test_redundant_basis_solve_trims_to_quotient_dim():
    field = PrimeField()
    ordering = MonomialOrdering.grevlex(2)
    spec = FIX["cubic_line"]
    F, _ = spec.random_instance(field, seed=6)
    gb, syz = groebner_with_syzygies(F, ordering)
    qb = sample_bases(gb, 1, seed=3, action=(1, 0), redundancy=1)[0]
    pt = build_param_template(build_H0(build_V(qb), gb), syz.rows, F, qb)
    t = prune_rows_cols(materialize(greedy_rowwise(pt)), F)
    plan = plan_from_template(t, spec, gb.d, field.p)
    assert len(plan.basis) == 4 and plan.quotient_dim == 3
    slots = {"c1": 0.7, "c2": -1.3, "c3": 0.4, "c4": -2.0}
    sols = solverun.solve(plan, slots)
    assert len(sols) == 3
    assert sols.residuals.max() < 1e-8


def test_pivoting_reduces_to_plain_when_P_equals_basis(cubic_plan):
    import copy

    plan = copy.deepcopy(cubic_plan)
    plan.permissible = list(plan.basis)
    M = solverun.instantiate(plan, EX3_SLOTS)
    a1 = solverun.action_from_template(M, plan)
    a2 = solverun.action_with_pivoting(M, plan)
    assert a2.basis == plan.basis
    assert np.allclose(a1.T, a2.T, atol=1e-12)


def test_pivoting_requires_permissible():
    plan, _ = generate(FIX["two_conics"], GenerateOptions(actions=["x"], seed=0))
    assert plan.permissible is None  # minimal template: P equals the basis
    M = solverun.instantiate(plan, {})
    with pytest.raises(ValueError):
        solverun.action_with_pivoting(M, plan)


def test_pivoting_agrees_on_published_plan(cubic_plan):
    assert cubic_plan.permissible is not None
    M = solverun.instantiate(cubic_plan, EX3_SLOTS)
    a1 = solverun.action_from_template(M, cubic_plan)
    a2 = solverun.action_with_pivoting(M, cubic_plan)
    w1 = np.sort_complex(np.linalg.eigvals(a1.T))
    w2 = np.sort_complex(np.linalg.eigvals(a2.T))
    assert np.allclose(w1, w2, atol=1e-10)
    sols = solverun.solve(cubic_plan, EX3_SLOTS, pivoting=True)
    feas = solverun.filter_roots(sols)
    assert len(feas) == 1
    assert feas.points[0][0].real == pytest.approx(2.955, abs=5e-4)


def test_load_slots(tmp_path):
    path = tmp_path / "vals.slots"
    path.write_text("# comment\na = 1.5\nb=-2\n\n")
    assert solverun.load_slots(path) == {"a": 1.5, "b": -2.0}


def test_ill_conditioned_raises(cubic_plan):
    M = solverun.instantiate(cubic_plan, EX3_SLOTS)
    M[:, 1:4] = 0.0  # wipe the reducible block
    with pytest.raises(solverun.IllConditioned):
        solverun.action_from_template(M, cubic_plan)
