"""Parameterized elimination templates and their greedy reduction.

The offline pipeline per (basis, action) candidate: build the ideal members
V = a*vect(B) - T_a*vect(B), certify them through the Groebner trace as
V = H0 . F, parameterize H = H0 + Theta * H1 over the syzygy generators H1,
then zero out as many shift columns as possible by the row-wise and
column-wise greedy searches.  Schur complement reduction and dependent
row/column pruning shrink the surviving template further; every stage is
re-verified on fresh Z/p instances of the same problem structure.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .arith import mod_matmul, mod_rref
from .basisgen import QuotientBasis, make_basis, sample_bases, standard_basis
from .groebner import groebner_with_syzygies
from .poly import Poly, mono_deg, mono_div, mono_divides, mono_mul


class MembershipError(RuntimeError):
    """A polynomial certified to lie in the ideal failed to reduce to zero."""


class SchurNotApplicable(ValueError):
    pass


class GenerationFailed(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


def build_V(basis: QuotientBasis):
    """The ideal members a*b_i - NF(a*b_i) expressed in the working basis."""
    gb = basis.gb
    fld, ordering = gb.field, gb.ordering
    out = []
    for i, t in enumerate(basis.targets()):
        v = Poly.from_monomial(t, fld, ordering)
        for j, b in enumerate(basis.monomials):
            c = int(basis.T[i, j])
            if c:
                v = v - Poly.from_monomial(b, fld, ordering, coeff=c)
        out.append(v)
    return out


def build_H0(V, gb):
    """Certificate rows H0 with H0 . F = V, from the Groebner trace."""
    fld, ordering = gb.field, gb.ordering
    s = len(gb.F)
    rows = []
    for v in V:
        quots, rem = gb.normal_form_with_quotients(v)
        if not rem.is_zero:
            raise MembershipError("V entry does not reduce to zero modulo the basis")
        row = [Poly.zero(fld, ordering) for _ in range(s)]
        for g_idx, q in enumerate(quots):
            if q.is_zero:
                continue
            for j in range(s):
                qj = gb.Q[g_idx][j]
                if not qj.is_zero:
                    row[j] = row[j] + q * qj
        check = Poly.zero(fld, ordering)
        for rj, fj in zip(row, gb.F):
            check = check + rj * fj
        if check != v:
            raise MembershipError("certificate expansion does not reproduce V")
        rows.append(row)
    return rows


@dataclass
class ParamTemplate:
    """Shift columns with entries affine in the parameters, plus solver state.

    Column ``idx`` is the shift ``shifts[idx] = (k, m)``; its entry in basis
    coordinate ``i`` is ``con[idx, i] + sum_t theta[i, t] * hom[idx, t]``.
    The residue matrix tracks each column's affine system reduced against the
    committed eliminations; a column is eliminated exactly when its residue
    vanishes, independent of how the remaining free parameters are chosen.
    """

    basis: QuotientBasis
    F: list
    shifts: list
    shift_support: list
    hom: np.ndarray
    con: np.ndarray
    residues: np.ndarray
    active: np.ndarray
    committed: list = dc_field(default_factory=list)

    @property
    def p(self):
        return self.basis.gb.field.p

    @property
    def n_params(self):
        return self.hom.shape[1]

    def clone(self):
        return ParamTemplate(
            basis=self.basis,
            F=self.F,
            shifts=self.shifts,
            shift_support=self.shift_support,
            hom=self.hom,
            con=self.con,
            residues=self.residues.copy(),
            active=self.active.copy(),
            committed=list(self.committed),
        )

    def generic_size(self):
        """Size of the parameterized template before any reduction."""
        rows = int(self.active.sum())
        support = set()
        for idx in np.nonzero(self.active)[0]:
            support |= self.shift_support[idx]
        return rows, len(support)


def build_param_template(H0, H1, F, basis):
    """Assemble the W matrix of the parameterization H = H0 + Theta * H1."""
    p = basis.gb.field.p
    nb = len(basis.monomials)
    l = len(H1)
    s = len(F)
    shifts = []
    ordering = basis.gb.ordering
    for k in range(s):
        sup = set()
        for i in range(nb):
            sup |= H0[i][k].support()
        for t in range(l):
            sup |= H1[t][k].support()
        for m in ordering.sorted_desc(sup):
            shifts.append((k, m))
    S = len(shifts)
    hom = np.zeros((S, l), dtype=np.int64)
    con = np.zeros((S, nb), dtype=np.int64)
    for idx, (k, m) in enumerate(shifts):
        for i in range(nb):
            con[idx, i] = H0[i][k].coeff(m)
        for t in range(l):
            hom[idx, t] = H1[t][k].coeff(m)
    residues = np.concatenate([hom, con], axis=1) % p
    active = residues.any(axis=1)
    support = [frozenset(mono_mul(m, fm) for fm in F[k].terms) for k, m in shifts]
    return ParamTemplate(
        basis=basis,
        F=F,
        shifts=shifts,
        shift_support=support,
        hom=hom % p,
        con=con % p,
        residues=residues,
        active=active,
    )


def _canonical_rows(residues, p):
    """Scale each row so its first nonzero entry is 1; returns (canon, piv)."""
    nz = residues != 0
    has = nz.any(axis=1)
    piv = np.where(has, nz.argmax(axis=1), -1)
    canon = residues.copy()
    idx = np.nonzero(has)[0]
    for r in idx:
        lead = int(canon[r, piv[r]])
        if lead != 1:
            canon[r] = canon[r] * pow(lead, p - 2, p) % p
    return canon, piv


def _commit_rows(pt, rows):
    """Reduce all residues against already-normalized elimination rows."""
    p = pt.p
    for rhat in rows:
        piv = int(np.nonzero(rhat)[0][0])
        factor = pt.residues[:, piv].copy()
        hit = np.nonzero(factor)[0]
        if hit.size:
            pt.residues[hit] = (pt.residues[hit] - factor[hit, None] * rhat[None, :]) % p
        pt.committed.append(rhat.copy())
    pt.active &= pt.residues.any(axis=1)


def _degree_list(pt, indices):
    return tuple(sorted((mono_deg(pt.shifts[i][1]) for i in indices), reverse=True))


def greedy_rowwise(pt: ParamTemplate):
    """Repeatedly zero out the single shift column with the maximal score.

    Zeroing column k solves one affine equation per basis coordinate; a
    column whose residue is proportional to k's is zeroed by the same
    commitment, so the score is the multiplicity of k's residue direction.
    """
    pt = pt.clone()
    l = pt.n_params
    p = pt.p
    while True:
        canon, piv = _canonical_rows(pt.residues, p)
        act = np.nonzero(pt.active)[0]
        if act.size == 0:
            break
        tokens = {}
        groups = {}
        for r in act:
            tok = canon[r].tobytes()
            tokens[r] = tok
            groups.setdefault(tok, []).append(r)
        candidates = [r for r in act if 0 <= piv[r] < l]
        if not candidates:
            break
        best = None
        for tok, members in groups.items():
            rep = members[0]
            if not (0 <= piv[rep] < l):
                continue
            score = len(members)
            entry = (score, _degree_list(pt, members), -min(members))
            if best is None or entry > best[0]:
                best = (entry, rep)
        if best is None:
            break
        _commit_rows(pt, [canon[best[1]]])
    return pt


def greedy_columnwise(pt: ParamTemplate):
    """Zero out, per step, every shift column containing one excessive monomial."""
    pt = pt.clone()
    l = pt.n_params
    p = pt.p
    ordering = pt.basis.gb.ordering
    bset = set(pt.basis.monomials)
    rset = set(pt.basis.reducible())
    while True:
        act = np.nonzero(pt.active)[0]
        if act.size == 0:
            break
        support = set()
        for idx in act:
            support |= pt.shift_support[idx]
        excessive = ordering.sorted_desc(support - rset - bset)
        if not excessive:
            break
        best = None
        for pos, e in enumerate(excessive):
            group = [i for i in act if e in pt.shift_support[i]]
            if not group:
                continue
            rr, pivcols = mod_rref(pt.residues[group], p)
            if any(c >= l for c in pivcols):
                continue  # inconsistent: would force a nonzero scalar to zero
            rows = rr[: len(pivcols)]
            if len(pivcols) == 0:
                continue
            red = (pt.residues[act] - mod_matmul(pt.residues[act][:, pivcols], rows, p)) % p
            zeroed = act[~red.any(axis=1)]
            score = int(zeroed.size)
            if score == 0:
                continue
            entry = (score, _degree_list(pt, zeroed), -pos)
            if best is None or entry > best[0]:
                best = (entry, rows)
        if best is None:
            break
        _commit_rows(pt, list(best[1]))
    return pt


# ---------------------------------------------------------------------------
# Materialized templates


@dataclass
class SchurInfo:
    acols: list  # excessive column monomials eliminated by the complement
    fstar_rows: list  # removed shift rows (poly index, monomial)
    K: list  # Fraction matrix, len(acols) x len(current columns)


@dataclass
class Template:
    rows: list  # (poly index, shift monomial), canonical order
    cols_E: list
    cols_R: list
    cols_B: list
    basis: QuotientBasis
    theta: np.ndarray = None  # committed parameter values (diagnostics)
    schur: SchurInfo = None

    @property
    def columns(self):
        return self.cols_E + self.cols_R + self.cols_B

    @property
    def size(self):
        return len(self.rows), len(self.cols_E) + len(self.cols_R) + len(self.cols_B)

    @property
    def ordering(self):
        return self.basis.gb.ordering

    def sort_key(self):
        ordering = self.ordering
        return tuple(sorted((tuple(ordering.key(m)), k) for k, m in self.rows))


def _canonical_row_order(rows, ordering):
    return sorted(rows, key=lambda km: (tuple(ordering.key(km[1])), -km[0]), reverse=True)


def materialize(pt: ParamTemplate):
    """Evaluate the parameterization at the committed values (free thetas 0)."""
    p = pt.p
    nb = len(pt.basis.monomials)
    l = pt.n_params
    theta = np.zeros((nb, l), dtype=np.int64)
    if pt.committed:
        rr, pivcols = mod_rref(np.array(pt.committed, dtype=np.int64), p)
        for row_i, c in enumerate(pivcols):
            if c >= l:
                raise RuntimeError("committed system forces an inconsistency")
            theta[:, c] = (-rr[row_i, l:]) % p
    col_vals = (pt.con + mod_matmul(theta, pt.hom.T, p).T) % p
    nonzero = col_vals.any(axis=1)
    if (nonzero & ~pt.active).any():
        raise RuntimeError("eliminated column evaluated to a nonzero vector")
    keep = np.nonzero(pt.active & nonzero)[0]
    rows = [pt.shifts[i] for i in keep]
    support = set()
    for i in keep:
        support |= pt.shift_support[i]
    return template_from_rows(rows, pt.basis, pt.F, theta=theta, support=support)


def template_from_rows(rows, basis, F, theta=None, support=None):
    ordering = basis.gb.ordering
    if support is None:
        support = set()
        for k, m in rows:
            support |= {mono_mul(m, fm) for fm in F[k].terms}
    bset = set(basis.monomials)
    reducible = basis.reducible()
    cols_B = [m for m in basis.monomials if m in support]
    cols_R = list(reducible)  # condition 1 demands all of them; verify reports gaps
    cols_E = ordering.sorted_desc(support - set(reducible) - bset)
    return Template(
        rows=_canonical_row_order(rows, ordering),
        cols_E=cols_E,
        cols_R=cols_R,
        cols_B=cols_B,
        basis=basis,
        theta=theta,
    )


def _coeff_grid(template, F, col_monos, dtype=np.int64):
    fld = F[0].field
    grid = np.zeros((len(template.rows), len(col_monos)), dtype=dtype)
    for i, (k, m) in enumerate(template.rows):
        terms = F[k].terms
        for j, col in enumerate(col_monos):
            if mono_divides(m, col):
                c = terms.get(mono_div(col, m))
                if c is not None:
                    grid[i, j] = c
    return grid


def instantiate_modp(template, F):
    """Numeric template matrix over Z/p for one instance of the problem."""
    p = F[0].field.p
    grid = _coeff_grid(template, F, template.columns) % p
    if template.schur is not None:
        C = _coeff_grid(template, F, template.schur.acols) % p
        fld = F[0].field
        K = np.array(
            [[fld.from_fraction(v) for v in row] for row in template.schur.K],
            dtype=np.int64,
        )
        grid = (grid - mod_matmul(C, K, p)) % p
    return grid


@dataclass
class VerifyResult:
    valid: bool
    reason: str
    mtilde: np.ndarray = None  # |R| x |Bbar| block of the reduced form
    pivots: list = None

    def __bool__(self):
        return self.valid


def verify_template(template, F):
    """Check the two defining conditions on one Z/p instance.

    Condition 1: every reducible monomial appears among the columns (i.e. in
    the support of the shifts).  Condition 2: the reduced row echelon form
    has a pivot in every reducible column and none in the basis columns,
    which is exactly the required block shape.
    """
    support = set()
    for k, m in template.rows:
        support |= {mono_mul(m, fm) for fm in F[k].terms}
    if template.schur is not None:
        support |= set(template.columns)
    missing = [m for m in template.cols_R if m not in support]
    if missing:
        return VerifyResult(False, "reducible monomials missing from the shifts: %r" % missing)
    p = F[0].field.p
    M = instantiate_modp(template, F)
    rref, pivots = mod_rref(M, p)
    nE, nR = len(template.cols_E), len(template.cols_R)
    r_cols = set(range(nE, nE + nR))
    piv_set = set(pivots)
    if any(c >= nE + nR for c in pivots):
        return VerifyResult(False, "pivot falls in the basis column block")
    if not r_cols <= piv_set:
        miss = sorted(r_cols - piv_set)
        return VerifyResult(
            False,
            "no pivot for reducible column(s) %r" % [template.cols_R[c - nE] for c in miss],
        )
    rows_for_r = {c: i for i, c in enumerate(pivots)}
    mtilde = np.array(
        [rref[rows_for_r[nE + j], nE + nR :] for j in range(nR)], dtype=np.int64
    )
    return VerifyResult(True, "ok", mtilde=mtilde, pivots=pivots)


def action_modp(template, F):
    """Action matrix read off the template over Z/p (oracle for the online path)."""
    res = verify_template(template, F)
    if not res:
        raise ValueError("invalid template: %s" % res.reason)
    p = F[0].field.p
    basis = template.basis
    nb = len(basis.monomials)
    b_pos = {m: j for j, m in enumerate(basis.monomials)}
    bbar_pos = [b_pos[m] for m in template.cols_B]
    full = np.zeros((len(template.cols_R), nb), dtype=np.int64)
    if template.cols_B:
        full[:, bbar_pos] = (-res.mtilde) % p
    r_index = {m: i for i, m in enumerate(template.cols_R)}
    T = np.zeros((nb, nb), dtype=np.int64)
    for i, t in enumerate(basis.targets()):
        if t in b_pos:
            T[i, b_pos[t]] = 1
        else:
            T[i] = full[r_index[t]]
    return T


def prune_rows_cols(template, F):
    """Drop dependent rows, then excessive columns without pivots (Z/p exact)."""
    p = F[0].field.p
    M = instantiate_modp(template, F)
    _, row_piv = mod_rref(M.T, p)
    kept_rows = list(row_piv)
    M2 = M[kept_rows]
    _, col_piv = mod_rref(M2, p)
    nE = len(template.cols_E)
    keep_e = [j for j in range(nE) if j in set(col_piv)]
    new_E = [template.cols_E[j] for j in keep_e]
    schur = template.schur
    if schur is not None:
        col_keep = keep_e + list(range(nE, len(template.columns)))
        schur = SchurInfo(
            acols=schur.acols,
            fstar_rows=schur.fstar_rows,
            K=[[row[j] for j in col_keep] for row in schur.K],
        )
    return Template(
        rows=[template.rows[i] for i in kept_rows],
        cols_E=new_E,
        cols_R=list(template.cols_R),
        cols_B=list(template.cols_B),
        basis=template.basis,
        theta=template.theta,
        schur=schur,
    )


def _fraction_rref(mat):
    """Exact reduced row echelon form over the rationals."""
    m = [list(row) for row in mat]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        sel = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if sel is None:
            continue
        m[r], m[sel] = m[sel], m[r]
        inv = Fraction(1, 1) / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m, pivots


def constant_coefficient_rows(problem, indices):
    """Fraction coefficient maps for the constant polynomials of a problem."""
    out = {}
    for k in indices:
        terms = {}
        for mono, ref in problem.polys[k]:
            if ref.slot is not None:
                raise SchurNotApplicable(
                    "polynomial %d has data-dependent coefficients" % k
                )
            terms[mono] = ref.literal
        out[k] = terms
    return out


def schur_reduce(template, problem, constant_indices):
    """Delete the shifts of constant sparse polynomials via D - C A^{-1} B."""
    if template.schur is not None:
        raise SchurNotApplicable("template already carries a Schur reduction")
    const_terms = constant_coefficient_rows(problem, constant_indices)
    fstar = [(i, km) for i, km in enumerate(template.rows) if km[0] in const_terms]
    if not fstar:
        raise SchurNotApplicable("no shifts of the constant polynomials in the template")
    cols = template.columns
    nE = len(template.cols_E)

    def frac_entry(km, col):
        k, m = km
        if not mono_divides(m, col):
            return Fraction(0)
        return const_terms[k].get(mono_div(col, m), Fraction(0))

    a_grid = [[frac_entry(km, template.cols_E[j]) for j in range(nE)] for _, km in fstar]
    _, apiv = _fraction_rref(a_grid)
    if len(apiv) < len(fstar):
        raise SchurNotApplicable("constant shift rows are linearly dependent")
    acols_idx = apiv[: len(fstar)]
    acols = [template.cols_E[j] for j in acols_idx]
    rest_cols = [c for j, c in enumerate(cols) if not (j < nE and j in set(acols_idx))]
    A = [[frac_entry(km, c) for c in acols] for _, km in fstar]
    B = [[frac_entry(km, c) for c in rest_cols] for _, km in fstar]
    aug = [arow + brow for arow, brow in zip(A, B)]
    rr, piv = _fraction_rref(aug)
    if piv != list(range(len(fstar))):
        raise SchurNotApplicable("A block is singular")
    K = [row[len(fstar) :] for row in rr[: len(fstar)]]
    fstar_set = {i for i, _ in fstar}
    new_E = [c for j, c in enumerate(template.cols_E) if j not in set(acols_idx)]
    return Template(
        rows=[km for i, km in enumerate(template.rows) if i not in fstar_set],
        cols_E=new_E,
        cols_R=list(template.cols_R),
        cols_B=list(template.cols_B),
        basis=template.basis,
        theta=template.theta,
        schur=SchurInfo(acols=acols, fstar_rows=[km for _, km in fstar], K=K),
    )


# ---------------------------------------------------------------------------
# Candidate pipeline


@dataclass
class StageInfo:
    name: str
    s: int
    n: int
    verified: bool = None


@dataclass
class CandidateRecord:
    kind: str
    ordering_desc: str
    basis_monomials: list
    action: tuple
    reciprocal: bool
    d: int
    stages: list
    strategy: str = ""
    verified: bool = False
    fail_reason: str = ""
    ms: float = 0.0


def reduce_candidate(pt, problem=None, constant_indices=None, verify_instances=(),
                     use_schur=False):
    """Run both greedy strategies, keep the smaller result, then Schur + prune.

    Returns (final Template or None, CandidateRecord stages, strategy name).
    ``verify_instances`` is a list of instantiated polynomial systems used to
    re-check template validity after every stage.
    """
    stages = []

    def check(t):
        return all(bool(verify_template(t, F)) for F in verify_instances)

    def push(name, t):
        s, n = t.size
        stages.append(StageInfo(name, s, n, check(t) if verify_instances else None))

    s0, n0 = pt.generic_size()
    stages.append(StageInfo("parameterized", s0, n0))
    t_row = materialize(greedy_rowwise(pt))
    push("rowwise", t_row)
    t_col = materialize(greedy_columnwise(pt))
    push("columnwise", t_col)

    def metric(t):
        s, n = t.size
        return (s * n, n, t.sort_key())

    if metric(t_row) <= metric(t_col):
        best, strategy = t_row, "rowwise"
    else:
        best, strategy = t_col, "columnwise"

    if use_schur and problem is not None and constant_indices:
        try:
            best = schur_reduce(best, problem, constant_indices)
            push("schur", best)
        except SchurNotApplicable:
            pass
    trace_F = pt.F
    best = prune_rows_cols(best, trace_F)
    push("prune", best)
    if stages[-1].verified is False:
        return None, stages, strategy
    failed = [st for st in stages if st.verified is False]
    if failed:
        return None, stages, strategy
    return best, stages, strategy


def template_metric(t):
    s, n = t.size
    return (s * n, n, t.sort_key())


# ---------------------------------------------------------------------------
# Full generation sweep


@dataclass
class GenerateOptions:
    orderings: int = 1
    bases: int = 0
    explicit_bases: list = None  # monomial lists to force as candidates
    actions: object = "all"  # "all" | [var names] | ("recip", var name)
    redundancy: int = 0
    use_schur: bool = False
    seed: int = 0
    verify_instances: int = 3
    jobs: int = 1
    require_pivoting: bool = False  # only accept plans with a permissible set
    forced_orderings: list = None  # bypass sampling with explicit orderings


def sample_orderings(nvars, count, seed):
    """Grevlex first, then distinct random weighted orderings.

    Weights stay within a moderately narrow band: orderings with one weight
    much smaller than the rest tend to produce noticeably larger templates.
    """
    import random as _random

    from .poly import MonomialOrdering

    out = [MonomialOrdering.grevlex(nvars)]
    seen = {(out[0].kind, out[0].weights, out[0].priority)}
    rng = _random.Random(seed)
    attempts = 0
    while len(out) < count and attempts < 50 * count:
        attempts += 1
        weights = tuple(rng.randint(40, 160) for _ in range(nvars))
        priority = tuple(rng.sample(range(nvars), nvars))
        key = ("weighted", weights, priority)
        if key in seen:
            continue
        seen.add(key)
        out.append(MonomialOrdering.weighted(weights, priority))
    return out


def action_candidates(problem, actions):
    nvars = problem.nvars

    def unit(i):
        return tuple(1 if j == i else 0 for j in range(nvars))

    if actions == "all":
        return [(unit(i), False) for i in range(nvars)]
    if isinstance(actions, tuple) and actions and actions[0] == "recip":
        return [(unit(problem.var_names.index(actions[1])), True)]
    return [(unit(problem.var_names.index(v)), False) for v in actions]


def _candidate_worker(args):
    """Run one (ordering, basis, action) candidate; used by process pools."""
    (problem, trace_seed, verify_seeds, ordering, basis_monos, action, recip,
     use_schur, redundancy) = args
    from .arith import PrimeField
    from .basisgen import SingularBasis
    from .groebner import NotZeroDimensional
    from .plan import PlanBuildError, plan_from_template

    field = PrimeField()
    t0 = time.monotonic()
    kind = "std" if basis_monos is None else "nstd"
    record = CandidateRecord(
        kind=kind,
        ordering_desc=ordering.describe(),
        basis_monomials=basis_monos,
        action=action,
        reciprocal=recip,
        d=0,
        stages=[],
    )
    plan = None
    try:
        F0, _ = problem.random_instance(field, seed=trace_seed, ordering=ordering)
        verify_Fs = [
            problem.random_instance(field, seed=s, ordering=ordering)[0]
            for s in verify_seeds
        ]
        gb, syz = groebner_with_syzygies(F0, ordering)
        record.d = gb.d
        if basis_monos is None:
            basis = standard_basis(gb, action)
        else:
            basis = make_basis(gb, basis_monos, action, reciprocal=recip)
        record.basis_monomials = list(basis.monomials)
        V = build_V(basis)
        H0 = build_H0(V, gb)
        pt = build_param_template(H0, syz.rows, F0, basis)
        tmpl, stages, strategy = reduce_candidate(
            pt,
            problem=problem,
            constant_indices=problem.constant_indices,
            verify_instances=verify_Fs,
            use_schur=use_schur,
        )
        record.stages = stages
        record.strategy = strategy
        if tmpl is None:
            record.fail_reason = "a reduction stage failed verification"
        else:
            try:
                plan = plan_from_template(tmpl, problem, gb.d, field.p)
                record.verified = True
            except PlanBuildError as exc:
                record.fail_reason = str(exc)
    except (NotZeroDimensional, SingularBasis, MembershipError, SchurNotApplicable) as exc:
        record.fail_reason = "%s: %s" % (type(exc).__name__, exc)
    record.ms = 1000.0 * (time.monotonic() - t0)
    return record, plan


def generate(problem, options: GenerateOptions = None):
    """Sweep (ordering, basis, action) candidates; return the smallest plan.

    All candidates trace the same random Z/p instance; each surviving
    template is re-verified on fresh instances at every reduction stage.
    Raises GenerationFailed (with per-candidate diagnostics) when no
    candidate yields a verified, packageable plan.
    """
    from .arith import PrimeField
    from .poly import MonomialOrdering

    options = options or GenerateOptions()
    field = PrimeField()
    trace_seed = options.seed
    verify_seeds = [trace_seed + 7919 * (t + 1) for t in range(options.verify_instances)]
    if options.forced_orderings:
        orderings = list(options.forced_orderings)
    else:
        orderings = sample_orderings(problem.nvars, max(1, options.orderings), options.seed)
    actions = action_candidates(problem, options.actions)

    jobs = []
    for ordering in orderings:
        for action, recip in actions:
            if recip:
                continue  # reciprocal actions need divisible bases
            jobs.append((ordering, None, action, False))
    base_ord = orderings[0]
    sampled = []
    if options.bases > 0 or any(r for _, r in actions) or options.explicit_bases:
        F0, _ = problem.random_instance(field, seed=trace_seed, ordering=base_ord)
        gb0, _syz0 = groebner_with_syzygies(F0, base_ord)
        for action, recip in actions:
            n_want = options.bases if not recip else max(options.bases, 1)
            if n_want > 0:
                for qb in sample_bases(
                    gb0,
                    n_want,
                    options.seed,
                    action,
                    redundancy=options.redundancy,
                    reciprocal=recip,
                ):
                    sampled.append((base_ord, list(qb.monomials), action, recip))
            if options.explicit_bases and not recip:
                for monos in options.explicit_bases:
                    sampled.append((base_ord, list(monos), action, False))
    jobs.extend(sampled)

    args = [
        (problem, trace_seed, verify_seeds, ordering, monos, action, recip,
         options.use_schur, options.redundancy)
        for ordering, monos, action, recip in jobs
    ]
    if options.jobs > 1 and len(args) > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=options.jobs) as pool:
            results = list(pool.map(_candidate_worker, args))
    else:
        results = [_candidate_worker(a) for a in args]

    records = [r for r, _ in results]
    best = None
    for idx, (record, plan) in enumerate(results):
        if plan is None:
            continue
        if options.require_pivoting and plan.permissible is None:
            record.fail_reason = "no permissible-monomial headroom for pivoting"
            continue
        s, n = plan.size
        key = (s * n, n, tuple(sorted((m, k) for k, m in plan.rows)), idx)
        if best is None or key < best[0]:
            best = (key, plan, record)
    if best is None:
        raise GenerationFailed(
            "no candidate produced a verified plan", diagnostics=records
        )
    return best[1], records
