import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dodecawave.quadrature import quadrature_31


def exact_monomial(a, b, c):
    # integral over the reference tetrahedron
    return math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 3)


def test_rule_shape():
    rule = quadrature_31()
    assert rule.points.shape == (31, 3)
    assert rule.weights.sum() == pytest.approx(1 / 6, abs=1e-16)
    np.testing.assert_allclose(rule.barycentric.sum(axis=1), 1.0, atol=1e-15)
    assert np.all(rule.barycentric >= 0)


def test_symmetric_under_vertex_permutations():
    rule = quadrature_31()
    key = {tuple(np.round(b, 12)): w for b, w in zip(rule.barycentric, rule.weights)}
    for perm in ([1, 0, 2, 3], [0, 2, 3, 1], [3, 2, 1, 0]):
        for b, w in zip(rule.barycentric, rule.weights):
            assert key[tuple(np.round(b[perm], 12))] == pytest.approx(w, abs=1e-16)


@pytest.mark.parametrize("degree", range(8))
def test_exact_through_degree_seven(degree):
    rule = quadrature_31()
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            c = degree - a - b
            got = rule.integrate(lambda x, y, z: x**a * y**b * z**c)
            assert got == pytest.approx(exact_monomial(a, b, c), rel=1e-12)


def test_not_exact_at_degree_nine():
    rule = quadrature_31()
    worst = max(
        abs(rule.integrate(lambda x, y, z: x**a * y ** (9 - a)) - exact_monomial(a, 9 - a, 0))
        / exact_monomial(a, 9 - a, 0)
        for a in range(10)
    )
    assert worst > 1e-8


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=4, max_size=4))
def test_affine_images(coeffs):
    # degree-7 polynomial in a linear form integrates exactly
    rule = quadrature_31()
    c0, c1, c2, c3 = coeffs
    f = lambda x, y, z: (c0 + c1 * x + c2 * y + c3 * z) ** 7
    exact = 0.0
    for a, b, c in product(range(8), repeat=3):
        d = 7 - a - b - c
        if d < 0:
            continue
        mult = math.factorial(7) // (math.factorial(a) * math.factorial(b) * math.factorial(c) * math.factorial(d))
        exact += mult * c0**d * c1**a * c2**b * c3**c * exact_monomial(a, b, c)
    assert rule.integrate(f) == pytest.approx(exact, rel=1e-10, abs=1e-10)


def test_table_lists_every_point():
    rows = quadrature_31().table().splitlines()
    assert len(rows) == 31
    assert all(len(r.split()) == 5 for r in rows)
