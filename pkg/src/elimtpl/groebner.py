"""Buchberger engine with cofactor tracking, normal forms, and syzygies.

Every basis element carries its exact representation in terms of the input
polynomials, so ideal-membership certificates (the H0 matrix downstream) and
first-syzygy generators fall out of the same trace.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field as dc_field

import numpy as np

from .poly import (
    Poly,
    mono_coprime,
    mono_deg,
    mono_div,
    mono_divides,
    mono_is_one,
    mono_lcm,
    mono_mul,
    mono_one,
)


class NotZeroDimensional(ValueError):
    """The ideal has infinitely many solutions (no finite standard basis)."""


def divide(f, divisors):
    """Full multivariate division of f by an ordered list of divisors.

    Returns (quotients, remainder) with f = sum(q_i * g_i) + r and no
    monomial of r divisible by any leading monomial of the divisors.
    Divisors are tried in list order, which makes the result deterministic.
    """
    fld = f.field
    ordering = f.ordering
    lead = [(g.lm(), g.lc()) for g in divisors]
    quots = [Poly.zero(fld, ordering) for _ in divisors]
    rem = {}
    work = dict(f.terms)
    while work:
        m = max(work, key=ordering.key)
        c = work.pop(m)
        for i, (glm, glc) in enumerate(lead):
            if mono_divides(glm, m):
                qm = mono_div(m, glm)
                qc = fld.div(c, glc)
                qt = quots[i]
                prev = qt.terms.get(qm, fld.zero)
                val = fld.add(prev, qc)
                if fld.is_zero(val):
                    qt.terms.pop(qm, None)
                else:
                    qt.terms[qm] = val
                for gm, gc in divisors[i].terms.items():
                    if gm == glm:
                        continue
                    mm = mono_mul(gm, qm)
                    v = fld.sub(work.get(mm, fld.zero), fld.mul(gc, qc))
                    if fld.is_zero(v):
                        work.pop(mm, None)
                    else:
                        work[mm] = v
                break
        else:
            rem[m] = c
    return quots, Poly(rem, fld, f.ordering, normalize=False)


@dataclass
class _Tracked:
    poly: Poly
    cof: list  # cofactors over the input tuple F


def _lift(row_over_basis, basis, nsrc, fld, ordering):
    """Combine basis cofactors: sum_t row[t] * cof(basis[t]) over F."""
    out = [Poly.zero(fld, ordering) for _ in range(nsrc)]
    for t, z in row_over_basis:
        if z.is_zero:
            continue
        for j in range(nsrc):
            cj = basis[t].cof[j]
            if not cj.is_zero:
                out[j] = out[j] + z * cj
    return out


class _Engine:
    """One Buchberger run; optionally harvests first-syzygy generators."""

    def __init__(self, F, ordering, collect_syzygies=False):
        if not F:
            raise ValueError("empty input system")
        self.fld = F[0].field
        self.ordering = ordering
        self.nsrc = len(F)
        self.collect = collect_syzygies
        self.syzygies = []  # rows over F
        self.basis = []
        self.pending = set()
        self.heap = []
        for j, f in enumerate(F):
            cof = [Poly.zero(self.fld, ordering) for _ in range(self.nsrc)]
            if f.is_zero:
                continue
            inv = self.fld.inv(f.lc())
            cof[j] = Poly.constant(inv, self.fld, ordering)
            self._insert(_Tracked(f.mul_scalar(inv), cof))

    def _insert(self, tracked):
        new = len(self.basis)
        self.basis.append(tracked)
        lm_new = tracked.poly.lm()
        for i in range(new):
            lcm = mono_lcm(self.basis[i].poly.lm(), lm_new)
            key = (mono_deg(lcm), self.ordering.key(lcm), i, new)
            heapq.heappush(self.heap, (key, i, new))
            self.pending.add((i, new))

    def _chain_skippable(self, i, j, lcm):
        for t in range(len(self.basis)):
            if t in (i, j):
                continue
            if not mono_divides(self.basis[t].poly.lm(), lcm):
                continue
            a = (min(i, t), max(i, t))
            b = (min(j, t), max(j, t))
            if a not in self.pending and b not in self.pending:
                return True
        return False

    def run(self):
        fld, ordering = self.fld, self.ordering
        while self.heap:
            _, i, j = heapq.heappop(self.heap)
            if (i, j) not in self.pending:
                continue
            self.pending.discard((i, j))
            gi, gj = self.basis[i].poly, self.basis[j].poly
            lmi, lmj = gi.lm(), gj.lm()
            if mono_coprime(lmi, lmj):
                # First criterion: the S-polynomial reduces to zero; the
                # associated syzygy is the Koszul relation of the pair.
                if self.collect:
                    row = _lift([(i, gj), (j, -gi)], self.basis, self.nsrc, fld, ordering)
                    self.syzygies.append(row)
                continue
            lcm = mono_lcm(lmi, lmj)
            if self._chain_skippable(i, j, lcm):
                continue
            ui, uj = mono_div(lcm, lmi), mono_div(lcm, lmj)
            s = gi.mul_mono(ui) - gj.mul_mono(uj)
            quots, rem = divide(s, [b.poly for b in self.basis])
            if rem.is_zero:
                if self.collect:
                    row_basis = [(i, Poly.from_monomial(ui, fld, ordering))]
                    row_basis.append((j, -Poly.from_monomial(uj, fld, ordering)))
                    row_basis += [(t, -q) for t, q in enumerate(quots) if not q.is_zero]
                    self.syzygies.append(_lift(row_basis, self.basis, self.nsrc, fld, ordering))
            else:
                cof = _lift(
                    [(i, Poly.from_monomial(ui, fld, ordering)),
                     (j, -Poly.from_monomial(uj, fld, ordering))]
                    + [(t, -q) for t, q in enumerate(quots) if not q.is_zero],
                    self.basis,
                    self.nsrc,
                    fld,
                    ordering,
                )
                inv = fld.inv(rem.lc())
                self._insert(_Tracked(rem.mul_scalar(inv), [c.mul_scalar(inv) for c in cof]))
        return self._reduce()

    def _reduce(self):
        """Minimalize then interreduce, keeping cofactors exact."""
        fld, ordering = self.fld, self.ordering
        by_lm = sorted(self.basis, key=lambda t: ordering.key(t.poly.lm()))
        kept = []
        for t in by_lm:
            lm = t.poly.lm()
            if any(mono_divides(k.poly.lm(), lm) for k in kept):
                continue
            kept.append(t)
        polys = [t.poly for t in kept]
        for idx in range(len(kept)):
            others = polys[:idx] + polys[idx + 1 :]
            quots, rem = divide(polys[idx], others)
            if rem.is_zero:  # cannot happen after minimalization
                raise RuntimeError("interreduction dropped a minimal element")
            cof = list(kept[idx].cof)
            qi = 0
            for oidx in list(range(idx)) + list(range(idx + 1, len(kept))):
                q = quots[qi]
                qi += 1
                if q.is_zero:
                    continue
                for j in range(self.nsrc):
                    oc = kept[oidx].cof[j]
                    if not oc.is_zero:
                        cof[j] = cof[j] - q * oc
            inv = fld.inv(rem.lc())
            kept[idx] = _Tracked(rem.mul_scalar(inv), [c.mul_scalar(inv) for c in cof])
            polys[idx] = kept[idx].poly
        return kept


@dataclass
class GroebnerResult:
    G: list  # reduced basis, sorted by leading monomial ascending
    Q: list  # cofactors: G[i] = sum_j Q[i][j] * F[j]
    std_basis: list  # standard monomials, ordering-descending
    d: int
    F: list
    ordering: object
    field: object
    _lms: list = dc_field(default=None, repr=False)

    def __post_init__(self):
        self._lms = [g.lm() for g in self.G]

    def normal_form(self, f):
        return divide(f, self.G)[1]

    def normal_form_with_quotients(self, f):
        return divide(f, self.G)

    def coords(self, f):
        """Coordinates of NF(f) in the standard basis (descending order)."""
        nf = self.normal_form(f)
        return np.array([nf.coeff(b) for b in self.std_basis], dtype=np.int64)

    def is_standard_monomial(self, m):
        return not any(mono_divides(lm, m) for lm in self._lms)

    def action_matrix_std(self, a):
        """Matrix of multiplication by monomial a in the standard basis."""
        if mono_is_one(a):
            raise ValueError("action monomial must differ from 1")
        fld, ordering = self.field, self.ordering
        rows = []
        for b in self.std_basis:
            rows.append(self.coords(Poly.from_monomial(mono_mul(a, b), fld, ordering)))
        return np.array(rows, dtype=np.int64)


def _standard_monomials(lms, ordering):
    k = ordering.nvars
    bounds = []
    for v in range(k):
        pure = [lm[v] for lm in lms if sum(lm) == lm[v]]
        if not pure:
            raise NotZeroDimensional(
                "no pure power of variable %d among leading monomials" % v
            )
        bounds.append(min(pure))
    def gen(prefix, v):
        if v == k:
            yield tuple(prefix)
            return
        for e in range(bounds[v]):
            yield from gen(prefix + [e], v + 1)
    std = [m for m in gen([], 0) if not any(mono_divides(lm, m) for lm in lms)]
    return ordering.sorted_desc(std)


def buchberger(F, ordering):
    """Reduced Groebner basis with exact cofactors and the standard basis."""
    engine = _Engine(F, ordering)
    kept = engine.run()
    G = [t.poly for t in kept]
    Q = [t.cof for t in kept]
    std = _standard_monomials([g.lm() for g in G], ordering)
    return GroebnerResult(
        G=G, Q=Q, std_basis=std, d=len(std), F=list(F), ordering=ordering, field=F[0].field
    )


@dataclass
class SyzygyGenerators:
    rows: list  # each row: list of Poly over the input tuple F


def _row_key(row, names):
    return tuple(tuple(sorted(p.terms.items())) for p in row)


def _normalize_row(row, fld):
    for p in row:
        if not p.is_zero:
            inv = fld.inv(p.lc())
            return [q.mul_scalar(inv) for q in row]
    return None


def groebner_with_syzygies(F, ordering, require_zero_dimensional=True):
    """Run Buchberger once, harvesting generators of the first syzygy module.

    The generating set combines the Schreyer syzygies of the traced
    S-polynomial reductions (with Koszul rows standing in for pairs skipped
    by the coprime criterion), lifted through the cofactor matrix, and the
    relations expressing each input through the reduced basis.  Every row is
    verified against H1 . F = 0 by exact expansion.  Syzygies exist for any
    ideal, so the zero-dimensionality check is optional here.
    """
    engine = _Engine(F, ordering, collect_syzygies=True)
    kept = engine.run()
    fld = F[0].field
    G = [t.poly for t in kept]
    Q = [t.cof for t in kept]
    try:
        std = _standard_monomials([g.lm() for g in G], ordering)
    except NotZeroDimensional:
        if require_zero_dimensional:
            raise
        std = []
    gb = GroebnerResult(
        G=G, Q=Q, std_basis=std, d=len(std), F=list(F), ordering=ordering, field=fld
    )

    rows = list(engine.syzygies)
    # Rows of I - R.Q: each input rewritten through the reduced basis.
    for j, f in enumerate(F):
        quots, rem = divide(f, G)
        if not rem.is_zero:
            raise RuntimeError("input polynomial failed to reduce to zero by its own basis")
        row = [Poly.zero(fld, ordering) for _ in F]
        row[j] = Poly.constant(fld.one, fld, ordering)
        for g_idx, q in enumerate(quots):
            if q.is_zero:
                continue
            for m in range(len(F)):
                qm = Q[g_idx][m]
                if not qm.is_zero:
                    row[m] = row[m] - q * qm
        rows.append(row)

    seen = set()
    out = []
    for row in rows:
        norm = _normalize_row(row, fld)
        if norm is None:
            continue
        key = _row_key(norm, None)
        if key in seen:
            continue
        seen.add(key)
        acc = Poly.zero(fld, ordering)
        for p, f in zip(norm, F):
            acc = acc + p * f
        if not acc.is_zero:
            raise RuntimeError("harvested row is not a syzygy")
        out.append(norm)
    return gb, SyzygyGenerators(rows=out)


def syzygy_generators(F, ordering):
    return groebner_with_syzygies(F, ordering, require_zero_dimensional=False)[1]
