"""Quotient-ring basis selection and action matrices in arbitrary bases.

A basis is any set of monomials whose normal-form coordinate matrix S has
full column rank d; redundant bases (more than d monomials) are allowed and
their spurious eigenpairs are filtered downstream by residual.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .arith import mod_inv_matrix, mod_left_inverse, mod_matmul, mod_rank, NotInvertible
from .poly import mono_deg, mono_div, mono_divides, mono_is_one, mono_mul


class SingularBasis(ValueError):
    """Candidate monomials do not span the quotient ring."""


@dataclass
class QuotientBasis:
    monomials: list  # ordering-descending
    is_standard: bool
    S: np.ndarray  # len(monomials) x d coordinates in the standard basis
    T: np.ndarray  # action matrix in this basis
    action: tuple  # action monomial
    reciprocal: bool
    gb: object

    @property
    def size(self):
        return len(self.monomials)

    def targets(self):
        """The shifted basis monomials a*b (or b/a for reciprocal actions)."""
        a = self.action
        if self.reciprocal:
            return [mono_div(b, a) for b in self.monomials]
        return [mono_mul(a, b) for b in self.monomials]

    def reducible(self):
        """Targets outside the basis, ordering-descending, deduplicated."""
        bset = set(self.monomials)
        return self.gb.ordering.sorted_desc({t for t in self.targets() if t not in bset})


def _coord_matrix(gb, monos):
    from .poly import Poly

    rows = [gb.coords(Poly.from_monomial(m, gb.field, gb.ordering)) for m in monos]
    return np.array(rows, dtype=np.int64).reshape(len(monos), gb.d)


def make_basis(gb, monomials, action, reciprocal=False):
    """Build a quotient basis with its change-of-basis and action matrices.

    T satisfies NF(a * b_i) = sum_j T[i, j] * b_j; for reciprocal actions the
    shifted monomial is b_i / a instead, so every basis monomial must be
    divisible by the action monomial.
    """
    if mono_is_one(action):
        raise ValueError("action monomial must differ from 1")
    p = gb.field.p
    monos = gb.ordering.sorted_desc(set(monomials))
    if len(monos) < gb.d:
        raise SingularBasis("need at least d = %d monomials" % gb.d)
    if reciprocal and not all(mono_divides(action, b) for b in monos):
        raise SingularBasis("reciprocal action needs every basis monomial divisible by it")
    S = _coord_matrix(gb, monos)
    if mod_rank(S, p) != gb.d:
        raise SingularBasis("coordinate matrix is rank deficient")
    if reciprocal:
        targets = [mono_div(b, action) for b in monos]
    else:
        targets = [mono_mul(action, b) for b in monos]
    S_t = _coord_matrix(gb, targets)
    if len(monos) == gb.d:
        L = mod_inv_matrix(S, p)
    else:
        L = mod_left_inverse(S, p)
    T = mod_matmul(S_t, L, p)
    is_std = monos == gb.std_basis
    return QuotientBasis(
        monomials=monos,
        is_standard=is_std,
        S=S,
        T=T,
        action=action,
        reciprocal=reciprocal,
        gb=gb,
    )


def standard_basis(gb, action):
    return make_basis(gb, gb.std_basis, action)


def nonstandard_basis(gb, candidate, action, reciprocal=False):
    if len(set(candidate)) != len(candidate):
        raise SingularBasis("candidate contains duplicate monomials")
    return make_basis(gb, candidate, action, reciprocal=reciprocal)


def _candidate_pool(gb, divisible_by=None):
    k = gb.ordering.nvars
    max_deg = max((mono_deg(m) for m in gb.std_basis), default=0) + 1

    def gen(prefix, v, budget):
        if v == k:
            yield tuple(prefix)
            return
        for e in range(budget + 1):
            yield from gen(prefix + [e], v + 1, budget - e)

    pool = list(gen([], 0, max_deg))
    if divisible_by is not None:
        pool = [m for m in pool if mono_divides(divisible_by, m)]
    return gb.ordering.sorted_desc(pool)


def sample_bases(gb, count, seed, action, redundancy=0, reciprocal=False):
    """Sample distinct invertible bases, biased toward low-degree monomials.

    Deterministic per seed; emits fewer than ``count`` (with a warning) when
    the candidate pool is exhausted.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    divisor = action if reciprocal else None
    pool = _candidate_pool(gb, divisible_by=divisor)
    size = gb.d + redundancy
    if len(pool) < size:
        warnings.warn("candidate pool smaller than requested basis size")
        return []
    rng = np.random.default_rng(seed)
    weights = np.array([2.0 ** (-mono_deg(m)) for m in pool])
    weights /= weights.sum()
    out = []
    seen = set()
    attempts = 0
    while len(out) < count and attempts < 60 * count:
        attempts += 1
        idx = rng.choice(len(pool), size=size, replace=False, p=weights)
        cand = frozenset(pool[i] for i in idx)
        if cand in seen:
            continue
        seen.add(cand)
        try:
            out.append(make_basis(gb, list(cand), action, reciprocal=reciprocal))
        except SingularBasis:
            continue
    if len(out) < count:
        warnings.warn(
            "sampled only %d of %d requested bases before pool exhaustion" % (len(out), count)
        )
    return out
