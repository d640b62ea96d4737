import numpy as np
import pytest

from elimtpl.arith import PrimeField
from elimtpl.poly import MonomialOrdering, Poly

NAMES2 = ["x", "y"]


@pytest.fixture(scope="session")
def field():
    return PrimeField()


@pytest.fixture(scope="session")
def ord2():
    return MonomialOrdering.grevlex(2)


@pytest.fixture
def two_conics_system(field, ord2):
    return [
        Poly.parse("x^2 + y^2 - 1", field, ord2, NAMES2),
        Poly.parse("x^2 + x*y + y^2 - 1", field, ord2, NAMES2),
    ]


@pytest.fixture
def cubic_line_system(field, ord2):
    return [
        Poly.parse("x^3 + y^2 - 1", field, ord2, NAMES2),
        Poly.parse("x - y - 1", field, ord2, NAMES2),
    ]


@pytest.fixture
def nonradical_system(field, ord2):
    return [
        Poly.parse("x^2 - y^2", field, ord2, NAMES2),
        Poly.parse("y^2 - x", field, ord2, NAMES2),
    ]


def signed(arr, p):
    """Map residues to symmetric representatives for readable comparisons."""
    a = np.asarray(arr, dtype=np.int64) % p
    return np.where(a > p // 2, a - p, a)


def poly_of(text, field, ordering, names=None):
    return Poly.parse(text, field, ordering, names or NAMES2)
