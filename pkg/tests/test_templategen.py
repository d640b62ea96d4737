import numpy as np
import pytest

from elimtpl.arith import PrimeField
from elimtpl.basisgen import nonstandard_basis, sample_bases, standard_basis
from elimtpl.groebner import buchberger, groebner_with_syzygies
from elimtpl.poly import MonomialOrdering, Poly, mono_parse
from elimtpl.problems import builtin_fixtures
from elimtpl.templategen import (
    GenerateOptions,
    GenerationFailed,
    ParamTemplate,
    SchurNotApplicable,
    Template,
    action_modp,
    build_H0,
    build_V,
    build_param_template,
    generate,
    greedy_columnwise,
    greedy_rowwise,
    instantiate_modp,
    materialize,
    prune_rows_cols,
    reduce_candidate,
    schur_reduce,
    template_from_rows,
    verify_template,
)
from conftest import NAMES2, poly_of, signed

FIX = builtin_fixtures()


def _setup(system, ordering, action=(1, 0), basis_monos=None):
    gb, syz = groebner_with_syzygies(system, ordering)
    if basis_monos is None:
        basis = standard_basis(gb, action)
    else:
        basis = nonstandard_basis(gb, basis_monos, action)
    V = build_V(basis)
    H0 = build_H0(V, gb)
    pt = build_param_template(H0, syz.rows, system, basis)
    return gb, syz, basis, V, H0, pt


def test_build_V_two_conics(two_conics_system, ord2):
    _, _, _, V, _, _ = _setup(two_conics_system, ord2)
    # Basis order (y^2, x, y, 1): V = (x*y^2, x^2 + y^2 - 1, x*y, 0).
    assert [v.format(NAMES2) for v in V] == ["x*y^2", "x^2 + y^2 - 1", "x*y", "0"]


def test_build_V_members_of_ideal(two_conics_system, cubic_line_system, ord2):
    for system in (two_conics_system, cubic_line_system):
        gb, syz = groebner_with_syzygies(system, ord2)
        for action in [(1, 0), (0, 1)]:
            for qb in [standard_basis(gb, action)] + sample_bases(gb, 3, 5, action):
                for v in build_V(qb):
                    assert gb.normal_form(v).is_zero


def test_build_H0_two_conics_matches_trace(two_conics_system, ord2):
    _, _, _, V, H0, _ = _setup(two_conics_system, ord2)
    fmt = [[q.format(NAMES2) for q in row] for row in H0]
    # Rows for basis order (y^2, x, y, 1); the zero V entry gets a zero row.
    assert fmt[0] == ["-y", "y"]
    assert fmt[1] == ["1", "0"]
    assert fmt[2] == ["-1", "1"]
    assert fmt[3] == ["0", "0"]


def test_build_H0_certificate_random(cubic_line_system, ord2):
    gb, syz, basis, V, H0, _ = _setup(cubic_line_system, ord2)
    for v, row in zip(V, H0):
        acc = Poly.zero(v.field, ord2)
        for q, f in zip(row, cubic_line_system):
            acc = acc + q * f
        assert acc == v


def test_theta_zero_template_is_H0_template(two_conics_system, ord2):
    _, _, basis, _, H0, pt = _setup(two_conics_system, ord2)
    t0 = materialize(pt)  # no commits: evaluates at theta = 0
    assert t0.size == (4, 8)
    assert {(k, m) for k, m in t0.rows} == {(0, (0, 1)), (1, (0, 1)), (0, (0, 0)), (1, (0, 0))}
    assert t0.cols_E == [mono_parse("x^2*y", NAMES2), mono_parse("y^3", NAMES2)]
    assert t0.cols_R == [
        mono_parse("x*y^2", NAMES2),
        mono_parse("x^2", NAMES2),
        mono_parse("x*y", NAMES2),
    ]
    assert t0.cols_B == [mono_parse("y^2", NAMES2), mono_parse("y", NAMES2), (0, 0)]


def test_columns_in_bijection_with_shifts(two_conics_system, ord2):
    *_, pt = _setup(two_conics_system, ord2)
    assert len(pt.shifts) == len(set(pt.shifts))
    assert pt.residues.shape[0] == len(pt.shifts)


def _tiny_param_template(field, hom, con, shifts=None, supports=None):
    ordering = MonomialOrdering.grevlex(2)
    hom = np.array(hom, dtype=np.int64) % field.p
    con = np.array(con, dtype=np.int64) % field.p
    S = hom.shape[0]
    shifts = shifts or [(0, (i, 0)) for i in range(S)]
    supports = supports or [frozenset({m}) for _, m in shifts]

    class _FakeGb:
        pass

    _FakeGb.field = field
    _FakeGb.ordering = ordering

    class _FakeBasis:
        monomials = [(0, 0)] * con.shape[1]
        gb = _FakeGb()

    residues = np.concatenate([hom, con], axis=1) % field.p
    return ParamTemplate(
        basis=_FakeBasis(),
        F=[],
        shifts=shifts,
        shift_support=supports,
        hom=hom,
        con=con,
        residues=residues.copy(),
        active=residues.any(axis=1),
    )


def test_greedy_rowwise_no_candidates(field):
    # Pure-constant columns can never be zeroed; greedy leaves them alone.
    pt = _tiny_param_template(field, hom=[[0], [0]], con=[[1], [2]])
    out = greedy_rowwise(pt)
    assert out.active.sum() == 2
    assert not out.committed


def test_greedy_rowwise_proportional_pair_single_commit(field):
    # Columns 1 and 2 carry proportional affine systems: one solve removes both.
    pt = _tiny_param_template(field, hom=[[1], [2], [0]], con=[[1], [2], [5]])
    out = greedy_rowwise(pt)
    assert list(out.active) == [False, False, True]
    assert len(out.committed) == 1


def test_greedy_rowwise_tie_break_prefers_high_degree(field):
    # Two independent single-column candidates; the higher-degree shift first.
    pt = _tiny_param_template(
        field,
        hom=[[1, 0], [0, 1]],
        con=[[1], [1]],
        shifts=[(0, (1, 0)), (0, (3, 0))],
    )
    out = greedy_rowwise(pt)
    assert len(out.committed) == 2
    assert not out.active.any()


def test_greedy_columnwise_empty_excessive(field, two_conics_system, ord2):
    *_, pt = _setup(two_conics_system, ord2)
    # Restrict every column's support to basis/reducible monomials: no
    # excessive candidates, so the search is a no-op.
    pt2 = pt.clone()
    rset = set(pt.basis.reducible())
    bset = set(pt.basis.monomials)
    pt2.shift_support = [frozenset(s & (rset | bset)) for s in pt.shift_support]
    out = greedy_columnwise(pt2)
    assert (out.active == pt.active).all()


def test_greedy_outputs_verify_and_shrink(ord2):
    field = PrimeField()
    for name in ("two_conics", "cubic_line", "nonradical"):
        spec = FIX[name]
        F, _ = spec.random_instance(field, seed=4)
        gb, syz = groebner_with_syzygies(F, ord2)
        basis = standard_basis(gb, (1, 0))
        pt = build_param_template(build_H0(build_V(basis), gb), syz.rows, F, basis)
        s0, n0 = pt.generic_size()
        for strategy in (greedy_rowwise, greedy_columnwise):
            t = materialize(strategy(pt))
            s, n = t.size
            assert s <= s0 and n <= n0
            assert verify_template(t, F)


def test_verify_two_conics_and_readoff(two_conics_system, field, ord2):
    _, _, basis, _, _, pt = _setup(two_conics_system, ord2)
    t0 = materialize(pt)
    res = verify_template(t0, two_conics_system)
    assert res.valid
    T = action_modp(t0, two_conics_system)
    assert (T == basis.T).all()
    # The read-off row for basis element 1 is the binary row picking x.
    x_pos = basis.monomials.index((1, 0))
    one_pos = basis.monomials.index((0, 0))
    expect = np.zeros(4, dtype=np.int64)
    expect[x_pos] = 1
    assert (T[one_pos] == expect).all()


def test_verify_detects_missing_pivot(two_conics_system, ord2):
    *_, pt = _setup(two_conics_system, ord2)
    t0 = materialize(pt)
    broken = Template(
        rows=[r for r in t0.rows if r != (0, (0, 1))],  # drop the y*f1 shift
        cols_E=t0.cols_E,
        cols_R=t0.cols_R,
        cols_B=t0.cols_B,
        basis=t0.basis,
    )
    res = verify_template(broken, two_conics_system)
    assert not res.valid
    assert "pivot" in res.reason


def test_verify_nonradical_partial_basis(nonradical_system, field, ord2):
    gb, syz = groebner_with_syzygies(nonradical_system, ord2)
    basis = standard_basis(gb, (0, 1))
    pt = build_param_template(build_H0(build_V(basis), gb), syz.rows, nonradical_system, basis)
    t0 = materialize(pt)
    assert t0.size == (3, 4)
    assert set(t0.cols_B) == {(1, 0)}  # proper subset of the basis
    res = verify_template(t0, nonradical_system)
    assert res.valid
    T = signed(action_modp(t0, nonradical_system), field.p)
    # Zero columns are appended for the absent basis monomials; read-off rows
    # for x and 1 are the binary picks of x*y and y.
    perm = [basis.monomials.index(m) for m in [(1, 1), (0, 1), (1, 0), (0, 0)]]
    Tp = T[np.ix_(perm, perm)]
    expected = np.array(
        [[0, 0, 1, 0], [0, 0, 1, 0], [1, 0, 0, 0], [0, 1, 0, 0]]
    )
    assert (Tp == expected).all()


def test_oracle_action_equivalence_random_candidates(ord2):
    field = PrimeField()
    for name in ("two_conics", "cubic_line"):
        spec = FIX[name]
        F, _ = spec.random_instance(field, seed=8)
        gb, syz = groebner_with_syzygies(F, ord2)
        for action in [(1, 0), (0, 1)]:
            for qb in [standard_basis(gb, action)] + sample_bases(gb, 2, 13, action):
                pt = build_param_template(build_H0(build_V(qb), gb), syz.rows, F, qb)
                t = prune_rows_cols(materialize(greedy_rowwise(pt)), F)
                assert (action_modp(t, F) == qb.T).all()


def test_prune_identity_on_minimal(two_conics_system, ord2):
    *_, pt = _setup(two_conics_system, ord2)
    t0 = materialize(pt)
    t1 = prune_rows_cols(t0, two_conics_system)
    s, n = t1.size
    assert n - s == len(t1.cols_B)
    t2 = prune_rows_cols(t1, two_conics_system)
    assert t2.size == t1.size and t2.rows == t1.rows


def test_prune_removes_duplicated_row(two_conics_system, ord2):
    *_, pt = _setup(two_conics_system, ord2)
    t0 = materialize(pt)
    dup = Template(
        rows=list(t0.rows) + [t0.rows[0]],
        cols_E=t0.cols_E,
        cols_R=t0.cols_R,
        cols_B=t0.cols_B,
        basis=t0.basis,
    )
    t1 = prune_rows_cols(dup, two_conics_system)
    assert len(t1.rows) == len(t0.rows)


def test_prune_preserves_reduced_block(two_conics_system, field, ord2):
    *_, pt = _setup(two_conics_system, ord2)
    t0 = materialize(pt)
    before = verify_template(t0, two_conics_system).mtilde
    t1 = prune_rows_cols(t0, two_conics_system)
    after = verify_template(t1, two_conics_system).mtilde
    assert (before == after).all()


# -- Schur complement ---------------------------------------------------------


def _quat_setup(seed=4, ordering=None):
    field = PrimeField()
    spec = FIX["quat_norm"]
    ordering = ordering or MonomialOrdering.grevlex(3)
    F, _ = spec.random_instance(field, seed=seed)
    gb, syz = groebner_with_syzygies(F, ordering)
    basis = standard_basis(gb, (1, 0, 0))
    pt = build_param_template(build_H0(build_V(basis), gb), syz.rows, F, basis)
    return spec, F, materialize(greedy_rowwise(pt))


def test_schur_reduces_constant_shifts():
    spec, F, t = _quat_setup()
    reduced = schur_reduce(t, spec, [0])
    assert all(k != 0 for k, _ in reduced.rows)
    s0, n0 = t.size
    s1, n1 = reduced.size
    assert s1 < s0 and n1 < n0
    assert verify_template(reduced, F)
    # Fresh instances keep validity (Schur fill-in is instance independent).
    for seed in (21, 22):
        F2, _ = spec.random_instance(PrimeField(), seed=seed)
        assert verify_template(reduced, F2)


def test_schur_preserves_reduced_block():
    spec, F, t = _quat_setup()
    reduced = schur_reduce(t, spec, [0])
    before = verify_template(t, F).mtilde
    after = verify_template(reduced, F).mtilde
    assert (before == after).all()
    pruned = prune_rows_cols(reduced, F)
    final = verify_template(pruned, F).mtilde
    assert (before == final).all()
    s, n = pruned.size
    assert n - s == len(pruned.cols_B)


def test_schur_identity_block_specialization(field):
    # With A = I the complement is literally D - C @ B.
    spec, F, t = _quat_setup()
    reduced = schur_reduce(t, spec, [0])
    M_full = instantiate_modp(t, F)
    M_red = instantiate_modp(reduced, F)
    cols = t.columns
    keep = [j for j, c in enumerate(cols) if c not in set(reduced.schur.acols)]
    arows = [i for i, km in enumerate(t.rows) if km[0] == 0]
    drows = [i for i in range(len(t.rows)) if i not in set(arows)]
    import elimtpl.arith as arith

    acols_idx = [cols.index(c) for c in reduced.schur.acols]
    A = M_full[np.ix_(arows, acols_idx)]
    B = M_full[np.ix_(arows, keep)]
    C = M_full[np.ix_(drows, acols_idx)]
    D = M_full[np.ix_(drows, keep)]
    Ainv = arith.mod_inv_matrix(A, field.p)
    expect = (D - arith.mod_matmul(arith.mod_matmul(C, Ainv, field.p), B, field.p)) % field.p
    assert (M_red == expect).all()


def test_schur_rejects_data_dependent_polys():
    field = PrimeField()
    spec = FIX["two_conics"]
    F, _ = spec.random_instance(field, seed=1)
    gb, syz = groebner_with_syzygies(F, MonomialOrdering.grevlex(2))
    basis = standard_basis(gb, (1, 0))
    t = materialize(build_param_template(build_H0(build_V(basis), gb), syz.rows, F, basis))
    spec_cl = FIX["cubic_line"]
    with pytest.raises(SchurNotApplicable):
        schur_reduce(t, spec_cl, [0])  # cubic_line poly 0 has slot coefficients


# -- full generation ----------------------------------------------------------


def test_generate_deterministic():
    opts = GenerateOptions(actions=["x"], seed=5, orderings=2)
    p1, _ = generate(FIX["two_conics"], opts)
    p2, _ = generate(FIX["two_conics"], opts)
    assert p1.format() == p2.format()


def test_generate_reports_stage_monotonicity():
    plan, records = generate(FIX["cubic_line"], GenerateOptions(actions="all", seed=2))
    assert records
    for rec in records:
        sizes = [(st.s, st.n) for st in rec.stages]
        areas = [s * n for s, n in sizes]
        assert all(a >= b for a, b in zip(areas, areas[1:])) or rec.fail_reason
        for st in rec.stages:
            assert st.verified in (None, True) or rec.fail_reason


def test_generate_failure_diagnostics(field, ord2):
    from elimtpl.problems import parse_problem

    bad = parse_problem("problem v1\nvars x y\npoly x*y - 1\n", name="positive_dim")
    with pytest.raises(GenerationFailed) as exc:
        generate(bad, GenerateOptions(actions=["x"], seed=0))
    assert exc.value.diagnostics
    assert any("NotZeroDimensional" in r.fail_reason for r in exc.value.diagnostics)


def test_generate_with_jobs_matches_serial():
    opts1 = GenerateOptions(actions="all", seed=9, orderings=2, jobs=1)
    opts2 = GenerateOptions(actions="all", seed=9, orderings=2, jobs=2)
    p1, _ = generate(FIX["two_conics"], opts1)
    p2, _ = generate(FIX["two_conics"], opts2)
    assert p1.format() == p2.format()


def test_degree_one_system_trivial_plan(field):
    from elimtpl.problems import parse_problem

    spec = parse_problem(
        "problem v1\nvars x y\npoly x + $a*y + $b\npoly y + $c\n", name="linear"
    )
    plan, _ = generate(spec, GenerateOptions(actions="all", seed=0))
    assert plan.quotient_dim == 1
    assert plan.size[0] >= 1
