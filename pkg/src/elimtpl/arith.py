"""Coefficient fields and exact dense linear algebra over Z/p.

The offline phase traces all symbolic computations over Z/p for a single
large prime; the online phase runs over float64.  Field elements are plain
Python scalars (int residues, floats, or Fractions) and the field object
supplies the operations, so polynomials and programs stay field-generic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# Largest prime below 2**30: a product of two residues fits in int64 with
# room left to accumulate a few terms before reducing.
DEFAULT_PRIME = 1_073_741_789


class NotInvertible(ZeroDivisionError):
    """Inverting zero, or a singular matrix, over the active field."""


@dataclass(frozen=True)
class PrimeField:
    """Z/p with elements stored as ints in [0, p)."""

    p: int = DEFAULT_PRIME

    def normalize(self, a):
        return int(a) % self.p

    def from_fraction(self, fr):
        fr = Fraction(fr)
        return self.mul(fr.numerator % self.p, self.inv(fr.denominator % self.p))

    def add(self, a, b):
        return (a + b) % self.p

    def sub(self, a, b):
        return (a - b) % self.p

    def mul(self, a, b):
        return (a * b) % self.p

    def neg(self, a):
        return (-a) % self.p

    def inv(self, a):
        a = int(a) % self.p
        if a == 0:
            raise NotInvertible("division by zero in Z/%d" % self.p)
        return pow(a, self.p - 2, self.p)

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def is_zero(self, a):
        return a % self.p == 0

    @property
    def zero(self):
        return 0

    @property
    def one(self):
        return 1

    def rand(self, rng):
        return rng.randrange(self.p)

    def rand_nonzero(self, rng):
        return rng.randrange(1, self.p)

    def magnitude(self, a):
        # Symmetric-residue magnitude; equals abs() for integers |n| < p/2,
        # which keeps pivot choices consistent with the rational path.
        a = int(a) % self.p
        return min(a, self.p - a)


@dataclass(frozen=True)
class RealField:
    """float64 coefficients for the online phase."""

    def normalize(self, a):
        return float(a)

    def from_fraction(self, fr):
        return float(Fraction(fr))

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def inv(self, a):
        if a == 0.0:
            raise NotInvertible("division by zero")
        return 1.0 / a

    def div(self, a, b):
        return a / b

    def is_zero(self, a):
        return a == 0.0

    @property
    def zero(self):
        return 0.0

    @property
    def one(self):
        return 1.0

    def rand(self, rng):
        return rng.uniform(-1.0, 1.0)

    def rand_nonzero(self, rng):
        while True:
            v = rng.uniform(-1.0, 1.0)
            if abs(v) > 1e-3:
                return v

    def magnitude(self, a):
        return abs(a)


@dataclass(frozen=True)
class FractionField:
    """Exact rationals; used to cross-check Z/p against the real path."""

    def normalize(self, a):
        return Fraction(a)

    def from_fraction(self, fr):
        return Fraction(fr)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def inv(self, a):
        if a == 0:
            raise NotInvertible("division by zero")
        return 1 / Fraction(a)

    def div(self, a, b):
        return Fraction(a) / b

    def is_zero(self, a):
        return a == 0

    @property
    def zero(self):
        return Fraction(0)

    @property
    def one(self):
        return Fraction(1)

    def rand(self, rng):
        return Fraction(rng.randrange(-50, 51))

    def rand_nonzero(self, rng):
        while True:
            v = self.rand(rng)
            if v != 0:
                return v

    def magnitude(self, a):
        return abs(a)


def rand_nonzero(field: PrimeField, seed: int) -> int:
    """Deterministic uniform draw from {1, ..., p-1}."""
    return field.rand_nonzero(random.Random(seed))


# ---------------------------------------------------------------------------
# Dense exact linear algebra over Z/p (int64 matrices, entries in [0, p)).
# Intermediate products stay below 2**60, so plain int64 ops are safe.


def _as_modmat(a, p):
    m = np.array(a, dtype=np.int64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    return np.mod(m, p)


def mod_matmul(a, b, p):
    """(a @ b) mod p without overflow; supports inner dim up to ~2**17."""
    a = np.mod(np.asarray(a, dtype=np.int64), p)
    b = np.mod(np.asarray(b, dtype=np.int64), p)
    a_hi, a_lo = np.divmod(a, 1 << 15)
    hi = np.mod(a_hi @ b, p)
    lo = np.mod(a_lo @ b, p)
    return np.mod((hi << 15) + lo, p)


def mod_rref(a, p):
    """Reduced row echelon form mod p. Returns (rref matrix, pivot columns)."""
    m = _as_modmat(a, p).copy()
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        pr = r + int(nz[0])
        if pr != r:
            m[[r, pr]] = m[[pr, r]]
        inv = pow(int(m[r, c]), p - 2, p)
        m[r] = (m[r] * inv) % p
        col = m[:, c].copy()
        col[r] = 0
        hit = np.nonzero(col)[0]
        if hit.size:
            m[hit] = (m[hit] - col[hit, None] * m[r]) % p
        pivots.append(c)
        r += 1
    return m, pivots


def mod_rank(a, p):
    return len(mod_rref(a, p)[1])


def mod_inv_matrix(a, p):
    m = _as_modmat(a, p)
    n = m.shape[0]
    if m.shape[1] != n:
        raise ValueError("matrix not square")
    aug = np.concatenate([m, np.eye(n, dtype=np.int64)], axis=1)
    r, piv = mod_rref(aug, p)
    if piv[:n] != list(range(n)):
        raise NotInvertible("singular matrix over Z/%d" % p)
    return r[:, n:]


def mod_solve(a, b, p):
    """Particular solution x of a @ x = b (mod p); raises if inconsistent.

    Free variables are set to zero.  b may be a vector or a matrix of
    right-hand sides.
    """
    m = _as_modmat(a, p)
    rhs = _as_modmat(b, p)
    vec = np.asarray(b).ndim == 1
    if vec:
        rhs = rhs.reshape(-1, 1)
    rows, cols = m.shape
    aug = np.concatenate([m, rhs], axis=1)
    r, piv = mod_rref(aug, p)
    if any(c >= cols for c in piv):
        raise NotInvertible("inconsistent linear system over Z/%d" % p)
    x = np.zeros((cols, rhs.shape[1]), dtype=np.int64)
    for i, c in enumerate(piv):
        x[c] = r[i, cols:]
    return x[:, 0] if vec else x


def mod_left_inverse(a, p):
    """L with L @ a = I for a tall full-column-rank a (mod p)."""
    m = _as_modmat(a, p)
    rows, cols = m.shape
    if rows < cols:
        raise NotInvertible("matrix has more columns than rows")
    # Solve a^T @ L^T = I columnwise; any particular solution works.
    lt = mod_solve(m.T, np.eye(cols, dtype=np.int64), p)
    return lt.T


def mod_nullspace(a, p):
    """Columns form a basis of the right null space of a (mod p)."""
    m = _as_modmat(a, p)
    rows, cols = m.shape
    r, piv = mod_rref(m, p)
    free = [c for c in range(cols) if c not in piv]
    basis = np.zeros((cols, len(free)), dtype=np.int64)
    for j, fc in enumerate(free):
        basis[fc, j] = 1
        for i, c in enumerate(piv):
            basis[c, j] = (-r[i, fc]) % p
    return basis
