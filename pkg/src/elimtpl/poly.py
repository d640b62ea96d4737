"""Monomials, monomial orderings, multivariate polynomials, Macaulay matrices.

Monomials are dense exponent tuples; the variable count is small (k <= ~10)
for the target problems, so tuple hashing beats any sparse scheme.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

Monomial = tuple  # exponent vector, one non-negative int per variable


class OrderingError(ValueError):
    pass


class PartitionError(ValueError):
    pass


def mono_one(k):
    return (0,) * k


def mono_is_one(m):
    return not any(m)


def mono_deg(m):
    return sum(m)


def mono_mul(a, b):
    return tuple(x + y for x, y in zip(a, b))


def mono_divides(a, b):
    """True when a | b componentwise."""
    return all(x <= y for x, y in zip(a, b))


def mono_div(a, b):
    """a / b; requires b | a."""
    if not mono_divides(b, a):
        raise ValueError("monomial %r does not divide %r" % (b, a))
    return tuple(x - y for x, y in zip(a, b))


def mono_lcm(a, b):
    return tuple(max(x, y) for x, y in zip(a, b))


def mono_coprime(a, b):
    return all(x == 0 or y == 0 for x, y in zip(a, b))


def mono_eval(m, point):
    v = 1.0
    for e, x in zip(m, point):
        if e:
            v = v * x**e
    return v


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def mono_format(m, names):
    if mono_is_one(m):
        return "1"
    parts = []
    for e, name in zip(m, names):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append("%s^%d" % (name, e))
    return "*".join(parts)


def mono_parse(text, names):
    text = text.strip()
    k = len(names)
    if text == "1":
        return mono_one(k)
    exps = [0] * k
    for factor in text.split("*"):
        if "^" in factor:
            name, _, e = factor.partition("^")
            exp = int(e)
        else:
            name, exp = factor, 1
        try:
            exps[names.index(name.strip())] += exp
        except ValueError:
            raise ValueError("unknown variable %r in monomial %r" % (name, text))
    return tuple(exps)


@dataclass(frozen=True)
class MonomialOrdering:
    """grevlex or weighted-degree order with a variable priority permutation.

    ``priority`` lists variable indices from most to least significant; the
    tie-break compares degrees in the least significant variable first
    (smaller degree wins, i.e. gives the larger monomial).
    """

    kind: str  # "grevlex" | "weighted"
    nvars: int
    weights: tuple = None
    priority: tuple = None

    def __post_init__(self):
        if self.kind not in ("grevlex", "weighted"):
            raise OrderingError("unknown ordering kind %r" % self.kind)
        if self.kind == "weighted":
            if self.weights is None or len(self.weights) != self.nvars:
                raise OrderingError("weighted ordering needs %d weights" % self.nvars)
            if any(w <= 0 for w in self.weights):
                raise OrderingError("weights must be positive")
        pri = self.priority
        if pri is None:
            object.__setattr__(self, "priority", tuple(range(self.nvars)))
        elif sorted(pri) != list(range(self.nvars)):
            raise OrderingError("priority must be a permutation of variable indices")

    @staticmethod
    def grevlex(nvars, priority=None):
        return MonomialOrdering("grevlex", nvars, None, priority)

    @staticmethod
    def weighted(weights, priority=None):
        return MonomialOrdering("weighted", len(weights), tuple(weights), priority)

    def key(self, m):
        if len(m) != self.nvars:
            raise OrderingError("monomial has %d variables, expected %d" % (len(m), self.nvars))
        if self.kind == "grevlex":
            head = sum(m)
        else:
            head = sum(w * e for w, e in zip(self.weights, m))
        tail = tuple(-m[i] for i in reversed(self.priority))
        return (head, tail)

    def cmp(self, a, b):
        ka, kb = self.key(a), self.key(b)
        return (ka > kb) - (ka < kb)

    def sorted_desc(self, monos):
        return sorted(monos, key=self.key, reverse=True)

    def max(self, monos):
        return max(monos, key=self.key)

    def describe(self):
        parts = [self.kind]
        if self.kind == "weighted":
            parts.append(" ".join(str(w) for w in self.weights))
        parts.append("priority " + " ".join(str(i) for i in self.priority))
        return " ".join(parts)

    @staticmethod
    def parse(text, nvars):
        toks = text.split()
        kind = toks[0]
        rest = toks[1:]
        priority = None
        if "priority" in rest:
            i = rest.index("priority")
            priority = tuple(int(t) for t in rest[i + 1 :])
            rest = rest[:i]
        if kind == "grevlex":
            return MonomialOrdering.grevlex(nvars, priority)
        if kind == "weighted":
            return MonomialOrdering.weighted(tuple(int(t) for t in rest), priority)
        raise OrderingError("cannot parse ordering %r" % text)


def compare(m1, m2, ordering):
    """Three-way comparison; returns -1, 0, or 1."""
    if len(m1) != len(m2):
        raise OrderingError("monomials of different variable counts")
    return ordering.cmp(m1, m2)


class Poly:
    """Sparse multivariate polynomial over an abstract coefficient field."""

    __slots__ = ("terms", "field", "ordering")

    def __init__(self, terms, field, ordering, normalize=True):
        if normalize:
            terms = {m: field.normalize(c) for m, c in terms.items()}
            terms = {m: c for m, c in terms.items() if not field.is_zero(c)}
        self.terms = terms
        self.field = field
        self.ordering = ordering

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, field, ordering):
        return cls({}, field, ordering, normalize=False)

    @classmethod
    def constant(cls, c, field, ordering):
        return cls({mono_one(ordering.nvars): c}, field, ordering)

    @classmethod
    def from_monomial(cls, m, field, ordering, coeff=None):
        return cls({m: field.one if coeff is None else coeff}, field, ordering)

    def copy(self):
        return Poly(dict(self.terms), self.field, self.ordering, normalize=False)

    # -- queries -------------------------------------------------------------

    @property
    def is_zero(self):
        return not self.terms

    def support(self):
        return set(self.terms)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: self.ordering.key(t[0]), reverse=True)

    def lm(self):
        if not self.terms:
            raise ValueError("zero polynomial has no leading monomial")
        return max(self.terms, key=self.ordering.key)

    def lc(self):
        return self.terms[self.lm()]

    def lt(self):
        m = self.lm()
        return m, self.terms[m]

    def coeff(self, m):
        return self.terms.get(m, self.field.zero)

    def total_degree(self):
        return max((mono_deg(m) for m in self.terms), default=0)

    # -- arithmetic ----------------------------------------------------------

    def _accum(self, other, sign):
        f = self.field
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = f.add(out.get(m, f.zero), c if sign > 0 else f.neg(c))
            if f.is_zero(v):
                out.pop(m, None)
            else:
                out[m] = v
        return Poly(out, f, self.ordering, normalize=False)

    def __add__(self, other):
        return self._accum(other, +1)

    def __sub__(self, other):
        return self._accum(other, -1)

    def __neg__(self):
        f = self.field
        return Poly({m: f.neg(c) for m, c in self.terms.items()}, f, self.ordering, normalize=False)

    def mul_term(self, m, c):
        f = self.field
        if f.is_zero(c):
            return Poly.zero(f, self.ordering)
        return Poly(
            {mono_mul(km, m): f.mul(kc, c) for km, kc in self.terms.items()},
            f,
            self.ordering,
            normalize=False,
        )

    def mul_scalar(self, c):
        return self.mul_term(mono_one(self.ordering.nvars), c)

    def mul_mono(self, m):
        return self.mul_term(m, self.field.one)

    def __mul__(self, other):
        f = self.field
        out = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = mono_mul(ma, mb)
                v = f.add(out.get(m, f.zero), f.mul(ca, cb))
                if f.is_zero(v):
                    out.pop(m, None)
                else:
                    out[m] = v
        return Poly(out, f, self.ordering, normalize=False)

    def monic(self):
        if self.is_zero:
            return self
        return self.mul_scalar(self.field.inv(self.lc()))

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        raise TypeError("Poly is not hashable")

    def evaluate(self, point):
        """Numeric evaluation (floats/complex); not for Z/p coefficients."""
        total = 0.0
        for m, c in self.terms.items():
            total = total + c * mono_eval(m, point)
        return total

    # -- text ----------------------------------------------------------------

    def format(self, names):
        if self.is_zero:
            return "0"
        f = self.field
        parts = []
        for m, c in self.sorted_terms():
            cs = _format_coeff(c, f)
            neg = cs.startswith("-")
            if neg:
                cs = cs[1:]
            if mono_is_one(m):
                body = cs
            elif cs == "1":
                body = mono_format(m, names)
            else:
                body = cs + "*" + mono_format(m, names)
            parts.append(("- " if neg else "+ ") + body)
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else "-" + text[2:]

    def __repr__(self):
        names = ["x%d" % (i + 1) for i in range(self.ordering.nvars)]
        return "Poly(%s)" % self.format(names)

    @classmethod
    def parse(cls, text, field, ordering, names):
        terms = {}
        for coeff_fr, mono in parse_poly_text(text, names):
            c = field.from_fraction(coeff_fr)
            prev = terms.get(mono, field.zero)
            terms[mono] = field.add(prev, c)
        return cls(terms, field, ordering)


def _format_coeff(c, field):
    if isinstance(field.zero, int):  # prime field: symmetric residue print
        r = c % field.p
        if r > field.p // 2:
            r -= field.p
        return str(r)
    if isinstance(c, Fraction):
        return str(c)
    if isinstance(c, float) and c == int(c) and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


_TERM_SPLIT = re.compile(r"(?=[+-])")
_NUM_RE = re.compile(r"^[0-9]+(\.[0-9]+)?(/[0-9]+)?$")


def parse_poly_text(text, names, slot_hook=None):
    """Parse ``3*x^2*y - 5`` style text into (coefficient, monomial) pairs.

    Coefficients are integers, decimals, or fractions (``3/4``); when
    ``slot_hook`` is given, ``$name`` factors are routed through it and the
    returned coefficient is whatever the hook produces.
    """
    k = len(names)
    text = text.replace(" ", "")
    if not text:
        raise ValueError("empty polynomial text")
    out = []
    for chunk in _TERM_SPLIT.split(text):
        if not chunk:
            continue
        sign = 1
        if chunk[0] == "+":
            chunk = chunk[1:]
        elif chunk[0] == "-":
            sign = -1
            chunk = chunk[1:]
        if not chunk:
            raise ValueError("dangling sign in %r" % text)
        coeff = Fraction(sign)
        slot = None
        exps = [0] * k
        for factor in chunk.split("*"):
            if not factor:
                raise ValueError("empty factor in term %r" % chunk)
            if factor.startswith("$"):
                if slot_hook is None:
                    raise ValueError("slot reference %r not allowed here" % factor)
                if slot is not None:
                    raise ValueError("more than one slot in term %r" % chunk)
                slot = factor[1:]
                continue
            if _NUM_RE.match(factor):
                coeff *= Fraction(factor)
                continue
            if "^" in factor:
                name, _, e = factor.partition("^")
                exp = int(e)
            else:
                name, exp = factor, 1
            if name not in names:
                raise ValueError("unknown variable %r in %r" % (name, chunk))
            exps[names.index(name)] += exp
        mono = tuple(exps)
        if slot is not None:
            out.append((slot_hook(slot, coeff), mono))
        else:
            out.append((coeff, mono))
    return out


# ---------------------------------------------------------------------------
# Shift sets and Macaulay matrices


def shift_set(F, A):
    """All shifts m * f_j for m in A_j, with provenance (j, m) retained."""
    if len(A) != len(F):
        raise ValueError("need one shift set per polynomial")
    out = []
    seen = set()
    for j, (f, monos) in enumerate(zip(F, A)):
        for m in f.ordering.sorted_desc(set(monos)):
            if (j, m) in seen:
                continue
            seen.add((j, m))
            out.append((j, m, f.mul_mono(m)))
    return out


@dataclass
class MacaulayMatrix:
    rows: list  # (shift monomial, poly index)
    columns: list  # monomials
    entries: np.ndarray
    blocks: tuple = None  # (nE, nR, nB) when partitioned

    @property
    def shape(self):
        return self.entries.shape

    def row_poly(self, i, field, ordering):
        terms = {}
        for j, m in enumerate(self.columns):
            c = self.entries[i, j]
            if not field.is_zero(field.normalize(c)):
                terms[m] = field.normalize(c)
        return Poly(terms, field, ordering, normalize=False)


def build_macaulay(shifted, ordering, partition=None, dtype=np.int64):
    """Assemble the Macaulay matrix of a shift list.

    ``shifted`` is a list of (poly index, shift monomial, product polynomial).
    With ``partition = (E, R, Bbar)`` the columns are those three blocks in
    order, each internally ordering-descending; the blocks must be disjoint
    and cover every monomial occurring in the shifts.  Without a partition the
    columns are all occurring monomials, ordering-descending.
    """
    support = set()
    for _, _, prod in shifted:
        support |= prod.support()
    if partition is None:
        columns = ordering.sorted_desc(support)
        blocks = None
    else:
        E, R, Bb = partition
        sets = [set(E), set(R), set(Bb)]
        if (sets[0] & sets[1]) or (sets[0] & sets[2]) or (sets[1] & sets[2]):
            raise PartitionError("partition blocks overlap")
        allowed = sets[0] | sets[1] | sets[2]
        missing = support - allowed
        if missing:
            raise PartitionError("monomials not covered by partition: %r" % sorted(missing))
        columns = (
            ordering.sorted_desc(sets[0])
            + ordering.sorted_desc(sets[1])
            + ordering.sorted_desc(sets[2])
        )
        blocks = (len(sets[0]), len(sets[1]), len(sets[2]))
    col_index = {m: j for j, m in enumerate(columns)}
    entries = np.zeros((len(shifted), len(columns)), dtype=dtype)
    rows = []
    for i, (j, m, prod) in enumerate(shifted):
        rows.append((m, j))
        for mm, c in prod.terms.items():
            entries[i, col_index[mm]] = c
    return MacaulayMatrix(rows=rows, columns=columns, entries=entries, blocks=blocks)
