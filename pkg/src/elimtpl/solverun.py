"""Online numeric phase: instantiate a plan, read off the action matrix,
eigendecompose, recover and filter roots, and score residuals.

All dense kernels are float64: partially pivoted elimination for the
template, column-pivoted QR for the optional stabilized path, and the
LAPACK unsymmetric eigensolver.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg

from .arith import RealField
from .poly import Poly, mono_div, mono_divides, mono_eval, mono_mul

_REAL = RealField()


class IllConditioned(RuntimeError):
    """The instantiated template cannot be reliably eliminated."""


def load_slots(path):
    slots = {}
    with open(path) as fh:
        for ln in fh:
            line = ln.split("#", 1)[0].strip()
            if not line:
                continue
            name, _, value = line.partition("=")
            if not value:
                raise ValueError("bad slot line %r" % ln.strip())
            slots[name.strip()] = float(value)
    return slots


def _term_values(plan, slots):
    return [
        {mono: ref.value(slots, _REAL) for mono, ref in terms}
        for terms in plan.poly_templates
    ]


def _grid(rows, col_monos, term_values):
    out = np.zeros((len(rows), len(col_monos)), dtype=float)
    for i, (k, m) in enumerate(rows):
        terms = term_values[k]
        for j, col in enumerate(col_monos):
            if mono_divides(m, col):
                v = terms.get(mono_div(col, m))
                if v is not None:
                    out[i, j] = v
    return out


def instantiate(plan, slots):
    """Fill the template with one instance's coefficients (Schur applied)."""
    tv = _term_values(plan, slots)
    M = _grid(plan.rows, plan.columns, tv)
    if plan.schur is not None:
        C = _grid(plan.rows, plan.schur.acols, tv)
        K = np.array([[float(v) for v in row] for row in plan.schur.K])
        M = M - C @ K
    return M


def instance_polys(plan, slots, ordering=None):
    """The input system as float polynomials (for residual evaluation)."""
    ordering = ordering or plan.ordering
    out = []
    for terms in plan.poly_templates:
        acc = {}
        for mono, ref in terms:
            v = ref.value(slots, _REAL)
            acc[mono] = acc.get(mono, 0.0) + v
        out.append(Poly(acc, _REAL, ordering))
    return out


def _forward_eliminate(M, strict_start, n_cols):
    """Partially pivoted elimination over the leading n_cols columns.

    Rows are equilibrated to unit norm first: the coefficient slots of
    data-driven problems span many orders of magnitude and an absolute pivot
    threshold would reject legitimate pivots.  Columns before
    ``strict_start`` may lack a pivot (linearly dependent excessive columns
    of unpruned templates); later columns must pivot.
    """
    U = np.array(M, dtype=float)
    norms = np.linalg.norm(U, axis=1)
    norms[norms == 0] = 1.0
    U = U / norms[:, None]
    s, _ = U.shape
    tol = 1e-12 * max(1.0, float(np.abs(U).max()))
    r = 0
    pivcols = []
    for c in range(n_cols):
        if r == s:
            if c >= strict_start:
                raise IllConditioned("ran out of rows before the reducible block")
            break
        col = np.abs(U[r:, c])
        pr = r + int(np.argmax(col))
        if col[pr - r] <= tol:
            if c >= strict_start:
                raise IllConditioned("no usable pivot for a reducible column")
            continue
        if pr != r:
            U[[r, pr]] = U[[pr, r]]
        factors = U[r + 1 :, c] / U[r, c]
        U[r + 1 :] -= np.outer(factors, U[r])
        U[r + 1 :, c] = 0.0
        pivcols.append(c)
        r += 1
    return U, pivcols, r


def _check_rcond(U_tri, what):
    if U_tri.size == 0:
        return
    try:
        c = np.linalg.cond(U_tri, 1)
    except np.linalg.LinAlgError:
        raise IllConditioned("%s is singular" % what)
    if not np.isfinite(c) or 1.0 / c < 1e-14:
        raise IllConditioned("%s has reciprocal condition below 1e-14" % what)


@dataclass
class ActionResult:
    T: np.ndarray
    basis: list  # monomials indexing eigenvector coordinates
    extra_monos: list  # further monomials with per-root values
    extra_rows: np.ndarray  # len(extra_monos) x len(basis); values = rows @ v


def action_from_template(M, plan):
    """Standard path: eliminate the excessive block, solve the reducible one."""
    nE, nR = len(plan.cols_E), len(plan.cols_R)
    nb = len(plan.basis)
    U, pivcols, r = _forward_eliminate(M, strict_start=nE, n_cols=nE + nR)
    n_piv_e = r - nR
    rows_r = U[n_piv_e:r]
    U_R = rows_r[:, nE : nE + nR]
    M_B = rows_r[:, nE + nR :]
    _check_rcond(U_R, "reducible block")
    X = -scipy.linalg.solve_triangular(U_R, M_B)
    bbar_pos = [plan.basis.index(m) for m in plan.cols_B]
    full = np.zeros((nR, nb))
    if bbar_pos:
        full[:, bbar_pos] = X
    T = np.zeros((nb, nb))
    for i, (kind, j) in enumerate(plan.readoff):
        if kind == "B":
            T[i, j] = 1.0
        else:
            T[i] = full[j]
    extra_monos = list(plan.cols_R)
    extra_rows = full
    if n_piv_e == nE and nE:
        # All excessive columns pivot (always true after pruning): their
        # values follow from back-substitution and enlarge the value map.
        e_vals = _excessive_values(U[:n_piv_e], nE, nR, bbar_pos, nb, full)
        if e_vals is not None:
            extra_monos = list(plan.cols_E) + extra_monos
            extra_rows = np.vstack([e_vals, extra_rows])
    return ActionResult(T=T, basis=list(plan.basis), extra_monos=extra_monos, extra_rows=extra_rows)


def _excessive_values(rows_e, nE, nR, bbar_pos, nb, r_forms):
    """Value forms of the excessive monomials via the eliminated top block."""
    U_EE = rows_e[:, :nE]
    if abs(np.diag(U_EE)).min() < 1e-12 * max(1.0, abs(U_EE).max()):
        return None
    b_forms = np.zeros((rows_e.shape[1] - nE - nR, nb))
    for j, pos in enumerate(bbar_pos):
        b_forms[j, pos] = 1.0
    rhs = rows_e[:, nE : nE + nR] @ r_forms + rows_e[:, nE + nR :] @ b_forms
    return -scipy.linalg.solve_triangular(U_EE, rhs)


def action_with_pivoting(M, plan):
    """Stabilized path: column-pivoted QR picks the instance-specific basis.

    Reduces exactly to the standard path when the permissible set equals the
    basis.  Requires the plan to carry its permissible monomials.
    """
    if plan.permissible is None:
        raise ValueError("plan carries no permissible monomial set")
    a = plan.action
    cols = plan.columns
    pos = {m: j for j, m in enumerate(cols)}
    P = list(plan.permissible)
    p_set = set(P)
    ordering = plan.ordering
    R_p = ordering.sorted_desc({mono_mul(a, p) for p in P} - p_set)
    ep_set = set(cols) - p_set - set(R_p)
    E_p = [c for c in cols if c in ep_set]
    perm = [pos[c] for c in E_p] + [pos[c] for c in R_p] + [pos[c] for c in P]
    M2 = M[:, perm]
    nE, nR, nP = len(E_p), len(R_p), len(P)
    nb = len(plan.basis)
    n_pb = nP - nb
    U, pivcols, r = _forward_eliminate(M2, strict_start=nE, n_cols=nE + nR)
    n_piv_e = r - nR
    rows_r = U[n_piv_e:r]
    U_R = rows_r[:, nE : nE + nR]
    M_P = rows_r[:, nE + nR :]
    N_P = U[r:, nE + nR :]
    _check_rcond(U_R, "reducible block")
    if n_pb == 0:
        X = -scipy.linalg.solve_triangular(U_R, M_P)
        T = _readoff_pivoted(plan, P, R_p, [], X, np.zeros((0, nb)))
        return ActionResult(T=T, basis=P, extra_monos=R_p, extra_rows=X)
    if N_P.shape[0] < n_pb:
        raise IllConditioned("not enough rows to pivot the permissible block")
    Q, Rf, permQ = scipy.linalg.qr(N_P, mode="economic", pivoting=True)
    U_PB = Rf[:n_pb, :n_pb]
    N_B = Rf[:n_pb, n_pb:]
    _check_rcond(U_PB, "pivoted permissible block")
    basis_inst = [P[permQ[j]] for j in range(n_pb, nP)]
    pminusb = [P[permQ[j]] for j in range(n_pb)]
    M_P_perm = M_P[:, permQ]
    M_PB, M_B = M_P_perm[:, :n_pb], M_P_perm[:, n_pb:]
    Y2 = scipy.linalg.solve_triangular(U_PB, N_B)  # vect(P\B) = -Y2 vect(B)
    Y1 = scipy.linalg.solve_triangular(U_R, M_B - M_PB @ Y2)
    T = _readoff_pivoted(plan, basis_inst, R_p, pminusb, -Y1, -Y2)
    extra_monos = list(R_p) + list(pminusb)
    extra_rows = np.vstack([-Y1, -Y2])
    if n_piv_e == nE and nE:
        b_pos = {m: j for j, m in enumerate(basis_inst)}
        p_forms = np.zeros((nP, nb))
        for j, p in enumerate(P):
            if p in b_pos:
                p_forms[j, b_pos[p]] = 1.0
            else:
                p_forms[j] = -Y2[pminusb.index(p)]
        rows_e = U[:n_piv_e]
        U_EE = rows_e[:, :nE]
        if abs(np.diag(U_EE)).min() >= 1e-12 * max(1.0, abs(U_EE).max()):
            rhs = rows_e[:, nE : nE + nR] @ (-Y1) + rows_e[:, nE + nR :] @ p_forms
            e_forms = -scipy.linalg.solve_triangular(U_EE, rhs)
            extra_monos = list(E_p) + extra_monos
            extra_rows = np.vstack([e_forms, extra_rows])
    return ActionResult(
        T=T,
        basis=basis_inst,
        extra_monos=extra_monos,
        extra_rows=extra_rows,
    )


def _readoff_pivoted(plan, basis_inst, R_p, pminusb, XR, XP):
    a = plan.action
    nb = len(basis_inst)
    b_pos = {m: j for j, m in enumerate(basis_inst)}
    r_pos = {m: j for j, m in enumerate(R_p)}
    p_pos = {m: j for j, m in enumerate(pminusb)}
    T = np.zeros((nb, nb))
    for i, b in enumerate(basis_inst):
        t = mono_mul(a, b)
        if t in b_pos:
            T[i, b_pos[t]] = 1.0
        elif t in r_pos:
            T[i] = XR[r_pos[t]]
        elif t in p_pos:
            T[i] = XP[p_pos[t]]
        else:
            raise IllConditioned("shifted basis monomial escaped the template")
    return T


# ---------------------------------------------------------------------------
# Roots


@dataclass
class SolutionSet:
    points: np.ndarray  # (n, k) complex
    eigenvalues: np.ndarray
    residuals: np.ndarray
    alg_mult: list
    geo_mult: list
    basis: list = dc_field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def take(self, idx):
        idx = list(idx)
        return SolutionSet(
            points=self.points[idx],
            eigenvalues=self.eigenvalues[idx],
            residuals=self.residuals[idx],
            alg_mult=[self.alg_mult[i] for i in idx],
            geo_mult=[self.geo_mult[i] for i in idx],
            basis=self.basis,
        )


def _eig_multiplicities(w, V):
    """Cluster eigenvalues; geometric multiplicity = rank of the cluster's vectors."""
    n = len(w)
    scale = max(1.0, float(np.abs(w).max()) if n else 1.0)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) <= 1e-6 * scale:
                parent[find(i)] = find(j)
    clusters = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)
    alg = [0] * n
    geo = [0] * n
    for members in clusters.values():
        vecs = V[:, members]
        sv = np.linalg.svd(vecs, compute_uv=False)
        rank = int(np.sum(sv > 1e-6 * sv[0])) if sv.size else 0
        for i in members:
            alg[i] = len(members)
            geo[i] = max(rank, 1)
    return alg, geo


def _value_forms(action, coeffs):
    """Monomial values as linear forms over a subspace given by ``coeffs``.

    ``coeffs`` has one column per subspace direction; returns a dict monomial
    -> row vector so that a vector sum_t c_t * coeffs[:, t] has monomial value
    form[m] @ c.
    """
    forms = {m: coeffs[i] for i, m in enumerate(action.basis)}
    if action.extra_monos:
        extra = action.extra_rows @ coeffs
        forms.update({m: extra[i] for i, m in enumerate(action.extra_monos)})
    return forms


def _split_pair_eigenspace(action, members, V):
    """Separate two roots sharing an eigenvalue via a product-consistency test.

    The eigensolver returns an arbitrary basis of a 2-dimensional eigenspace;
    the genuine root vectors are the directions where the monomial value map
    is multiplicative.  Any coincidence m1 * m2 == m3 * m4 among available
    monomials gives a homogeneous quadratic whose two projective solutions
    are those directions.
    """
    W2 = V[:, members].astype(complex)
    U, sv, _ = np.linalg.svd(W2, full_matrices=False)
    basis2 = U[:, :2]
    forms = _value_forms(action, basis2)
    scale = max(np.abs(np.concatenate(list(forms.values()))).max(), 1e-30)
    by_product = {}
    for m in forms:
        for m2 in forms:
            key = mono_mul(m, m2)
            by_product.setdefault(key, set()).add(tuple(sorted((m, m2))))
    for pairs in by_product.values():
        pairs = sorted(pairs)
        for a_idx in range(len(pairs)):
            for b_idx in range(a_idx + 1, len(pairs)):
                (m1, m2), (m3, m4) = pairs[a_idx], pairs[b_idx]
                L1, L2 = forms[m1], forms[m2]
                L3, L4 = forms[m3], forms[m4]
                Q = np.outer(L1, L2) - np.outer(L3, L4)
                A = Q[0, 0]
                B = Q[0, 1] + Q[1, 0]
                C = Q[1, 1]
                mags = np.abs([A, B, C])
                if mags.max() <= 1e-8 * scale * scale:
                    continue
                # Roots of A + B*r + C*r^2 with direction (1, r); C ~ 0 adds (0, 1).
                sols = []
                if abs(C) > 1e-10 * mags.max():
                    disc = np.sqrt(complex(B * B - 4 * A * C))
                    sols = [(-B + disc) / (2 * C), (-B - disc) / (2 * C)]
                    if abs(sols[0] - sols[1]) <= 1e-6 * (1 + abs(sols[0])):
                        continue
                    vecs = [basis2[:, 0] + r * basis2[:, 1] for r in sols]
                elif abs(B) > 1e-10 * mags.max():
                    vecs = [basis2[:, 0] + (-A / B) * basis2[:, 1], basis2[:, 1]]
                else:
                    continue
                return [v / np.linalg.norm(v) for v in vecs]
    return None


def extract_roots(action: ActionResult, plan, term_values=None):
    """Eigendecompose the action matrix and read the variables off each root.

    Non-defective repeated eigenvalues (the action monomial failing to
    separate two roots) are split inside their eigenspace before read-off.
    """
    w, V = np.linalg.eig(action.T)
    alg, geo = _eig_multiplicities(w, V)
    vectors = V.astype(complex).copy()
    done = set()
    for j in range(len(w)):
        if j in done or alg[j] != 2 or geo[j] != 2:
            continue
        members = [i for i in range(len(w)) if abs(w[i] - w[j]) <= 1e-6 * max(1.0, np.abs(w).max())]
        if len(members) != 2:
            continue
        split = _split_pair_eigenspace(action, members, V)
        if split is not None:
            vectors[:, members[0]] = split[0]
            vectors[:, members[1]] = split[1]
        done.update(members)
    ordering = plan.ordering
    min_idx = min(range(len(action.basis)), key=lambda j: ordering.key(action.basis[j]))
    k = plan.nvars
    points = np.full((len(w), k), np.nan, dtype=complex)
    for j in range(len(w)):
        v = vectors[:, j]
        pivot = v[min_idx]
        if abs(pivot) < 1e-12:
            pivot = v[np.argmax(np.abs(v))]
        v = v / pivot
        vals = {m: v[i] for i, m in enumerate(action.basis)}
        if action.extra_monos:
            extra = action.extra_rows @ v
            vals.update({m: extra[i] for i, m in enumerate(action.extra_monos)})
        vscale = max(np.abs(np.array(list(vals.values()))).max(), 1e-30)
        for vi, var in enumerate(plan.var_names):
            value = None
            fallback = None
            for st in plan.extraction[var]:
                if st[0] == "eig":
                    lam = w[j]
                    if plan.reciprocal:
                        value = 1.0 / lam if abs(lam) > 1e-300 else complex(np.inf)
                    else:
                        value = lam
                    break
                num, den = vals.get(st[1]), vals.get(st[2])
                if num is None or den is None:
                    continue
                if abs(den) > 1e-8 * vscale:
                    value = num / den
                    break
                if fallback is None and abs(den) > 0:
                    fallback = num / den
            if value is None:
                value = fallback if fallback is not None else complex(np.nan)
            points[j, vi] = value
    return points, w, alg, geo


def residual_error(F, points):
    """SM-style numeric error: row-normalized Macaulay times unit root vectors."""
    return float(np.linalg.norm(_residual_matrix(F, points)))


def per_root_residuals(F, points):
    R = _residual_matrix(F, points)
    return np.linalg.norm(R, axis=0)


def _residual_matrix(F, points):
    support = sorted({m for f in F for m in f.terms})
    M = np.zeros((len(F), len(support)))
    for i, f in enumerate(F):
        for j, m in enumerate(support):
            M[i, j] = f.terms.get(m, 0.0)
    norms = np.linalg.norm(M, axis=1)
    norms[norms == 0] = 1.0
    M = M / norms[:, None]
    npts = len(points)
    U = np.zeros((len(support), npts), dtype=complex)
    for c in range(npts):
        pt = points[c]
        if np.any(~np.isfinite(pt)):
            U[:, c] = 0.0
            continue
        col = np.array([mono_eval(m, pt) for m in support], dtype=complex)
        nrm = np.linalg.norm(col)
        U[:, c] = col / (nrm if nrm > 0 else 1.0)
    out = M @ U
    for c in range(npts):
        if np.any(~np.isfinite(points[c])):
            out[:, c] = np.inf
    return out


def solve(plan, slots, pivoting=False):
    """Full online solve; returns every eigenpair's root with its residual.

    Redundant solving bases (more basis monomials than solutions) keep only
    the quotient-dimension best-residual roots.
    """
    M = instantiate(plan, slots)
    if pivoting:
        action = action_with_pivoting(M, plan)
    else:
        action = action_from_template(M, plan)
    points, w, alg, geo = extract_roots(action, plan)
    F = instance_polys(plan, slots)
    res = per_root_residuals(F, points)
    sols = SolutionSet(
        points=points,
        eigenvalues=w,
        residuals=res,
        alg_mult=alg,
        geo_mult=geo,
        basis=action.basis,
    )
    if len(sols) > plan.quotient_dim:
        order = np.argsort(res)[: plan.quotient_dim]
        sols = sols.take(sorted(order))
    return sols


# ---------------------------------------------------------------------------
# Feasibility filtering


_CMP_RE = re.compile(
    r"^(?:(?P<lo>-?[0-9.]+)\s*(?P<lop><=|<)\s*)?"
    r"(?P<var>[A-Za-z_][A-Za-z0-9_]*)\s*"
    r"(?:(?P<op><=|<|>=|>)\s*(?P<rhs>-?[0-9.]+))?$"
)


def parse_filters(exprs, var_names):
    """Parse feasibility clauses: ``real``, ``real(x)``, ``x>0``, ``-1<=x<=1``."""
    clauses = []
    for raw in exprs:
        for text in raw.split(","):
            text = text.strip()
            if not text:
                continue
            if text == "real":
                clauses.append(("real", None))
                continue
            m = re.match(r"^real\((\w+)\)$", text)
            if m:
                clauses.append(("real", var_names.index(m.group(1))))
                continue
            m = _CMP_RE.match(text)
            if not m or (m.group("lo") is None and m.group("op") is None):
                raise ValueError("cannot parse filter clause %r" % text)
            vi = var_names.index(m.group("var"))
            if m.group("lo") is not None:
                lo = float(m.group("lo"))
                strict = m.group("lop") == "<"
                clauses.append(("cmp", vi, ">" if strict else ">=", lo))
            if m.group("op") is not None:
                clauses.append(("cmp", vi, m.group("op"), float(m.group("rhs"))))
    return clauses


def _is_real(z, tau_im):
    return abs(z.imag) <= tau_im * (1.0 + abs(z.real))


def filter_roots(sols, clauses=(), tau_im=1e-6, require_real=True, keep_best=None):
    """Drop infeasible roots; optionally keep only the best-residual ones."""
    keep = []
    for i, pt in enumerate(sols.points):
        if np.any(~np.isfinite(pt)):
            continue
        ok = True
        if require_real and not all(_is_real(z, tau_im) for z in pt):
            ok = False
        for cl in clauses:
            if not ok:
                break
            if cl[0] == "real":
                if cl[1] is None:
                    ok = all(_is_real(z, tau_im) for z in pt)
                else:
                    ok = _is_real(pt[cl[1]], tau_im)
            else:
                _, vi, op, rhs = cl
                x = pt[vi].real
                ok = {"<": x < rhs, "<=": x <= rhs, ">": x > rhs, ">=": x >= rhs}[op]
        if ok:
            keep.append(i)
    out = sols.take(keep)
    if keep_best is not None and len(out) > keep_best:
        order = np.argsort(out.residuals)[:keep_best]
        out = out.take(sorted(order))
    return out
