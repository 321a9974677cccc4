import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dodecawave import group

from conftest import random_unit_quaternions

SIGMA = (1 + math.sqrt(5)) / 2

# g_i(S_j) = S_k for the six gluings of the first six faces
VERTEX_IMAGES = {
    1: [(3, 6), (18, 8), (16, 11), (5, 17), (20, 2)],
    2: [(18, 15), (12, 17), (9, 2), (7, 19), (3, 4)],
    3: [(3, 1), (7, 11), (10, 17), (14, 15), (20, 13)],
    4: [(20, 9), (14, 8), (19, 11), (4, 1), (5, 12)],
    5: [(5, 10), (4, 6), (15, 8), (13, 9), (16, 7)],
    6: [(16, 19), (13, 2), (1, 6), (12, 10), (18, 14)],
}

unit4 = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(
    lambda v: sum(c * c for c in v) > 1e-3
)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_group_has_120_unit_elements():
    q = group.group_quaternions()
    assert q.shape == (120, 4)
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-15)
    assert len({tuple(np.round(v, 9)) for v in q}) == 120


def test_identity_first_then_descending_real_part():
    q = group.group_quaternions()
    np.testing.assert_array_equal(q[0], [1, 0, 0, 0])
    assert np.all(np.diff(q[:, 0]) <= 1e-12)


def test_multiplication_table_is_a_group_law():
    q = group.group_quaternions()
    table = group.multiplication_table()
    prod = group.quat_mul(q[:, None], q[None, :])
    np.testing.assert_allclose(prod, q[table], atol=1e-14)
    # each row and column is a permutation
    for row in table:
        assert sorted(row) == list(range(120))
    assert np.all(table[:, 0] == np.arange(120))
    inv = group.inverse_indices()
    assert np.all(table[np.arange(120), inv] == 0)


def test_element_orders_match_binary_icosahedral_class_sizes():
    # conjugacy classes of 2I by real part: 1, 1, 30, 20, 20, 12 x 4
    w = np.round(group.group_quaternions()[:, 0], 9)
    counts = {v: int(c) for v, c in zip(*np.unique(w, return_counts=True))}
    assert counts[1.0] == 1 and counts[-1.0] == 1 and counts[0.0] == 30
    assert counts[0.5] == 20 and counts[-0.5] == 20
    for v in (SIGMA / 2, 1 / (2 * SIGMA), -SIGMA / 2, -1 / (2 * SIGMA)):
        assert counts[round(v, 9)] == 12


def test_translations_are_inverse_pairs_at_angle_pi_over_5():
    gs = group.translation_quaternions()
    np.testing.assert_allclose(gs[6:], group.quat_conj(gs[:6]), atol=0)
    np.testing.assert_allclose(gs[:, 0], math.cos(math.pi / 5), atol=1e-15)
    assert [g.tag for g in group.clifford_translations()] == [f"g{i}" for i in range(1, 13)]
    assert [g.index for g in group.clifford_translations()] == [10, 11, 7, 4, 8, 12, 3, 2, 6, 9, 5, 1]


@pytest.mark.parametrize("i", sorted(VERTEX_IMAGES))
def test_vertex_images_under_gluings(i):
    verts = group.domain_vertices()
    g = group.translation_quaternions()[i - 1]
    for j, k in VERTEX_IMAGES[i]:
        np.testing.assert_allclose(group.quat_mul(g, verts[j - 1]), verts[k - 1], atol=1e-15)


def test_glued_faces_follow_vertex_images():
    dom = group.fundamental_domain()
    for i, pairs in VERTEX_IMAGES.items():
        assert dom.faces[i - 1] == tuple(j for j, _ in pairs)
        assert dom.faces[i + 5] == tuple(k for _, k in pairs)
        assert dom.partner(i - 1) == i + 5 and dom.partner(i + 5) == i - 1


def test_every_vertex_is_shared_by_three_faces():
    dom = group.fundamental_domain()
    counts = np.bincount(np.concatenate(dom.faces), minlength=21)[1:]
    assert np.all(counts == 3)


def test_vertices_sit_at_outer_radius():
    verts = group.domain_vertices()
    np.testing.assert_allclose(np.linalg.norm(verts, axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(verts[:, 0], math.cos(group.D_MAX), atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(verts[:, 1:], axis=1), group.R_MAX, atol=1e-15)


def test_outer_radius_constants():
    assert group.D_MAX == pytest.approx(0.388139515, abs=1e-9)
    assert group.R_MAX == pytest.approx(math.sin(group.D_MAX), abs=1e-15)
    assert abs(group.D_MAX - 0.388) < 5e-4
    assert abs(group.R_MAX - 0.378) < 5e-4


def test_face_normals_bisect_center_and_translate():
    n = group.face_normals()
    gs = group.translation_quaternions()
    e = np.array([1.0, 0, 0, 0])
    dom = group.fundamental_domain()
    for k in range(12):
        # the face is the bisector of the center and its translate across it
        partner = gs[dom.partner(k)]
        bis = _unit(e - group.quat_conj(gs[k]))
        assert abs(abs(n[k] @ bis) - 1) < 1e-12 or abs(abs(n[k] @ _unit(e - partner)) - 1) < 1e-12
        verts = dom.vertices[np.array(dom.faces[k]) - 1]
        np.testing.assert_allclose(verts @ n[k], 0.0, atol=1e-14)


def test_center_is_interior_and_vertices_are_vertices():
    assert group.contains(np.array([1.0, 0, 0, 0])).kind == "interior"
    for v in group.domain_vertices():
        loc = group.contains(v)
        assert loc.kind == "vertex" and loc.class_size == 4


def test_injectivity_radius_is_half_translation_distance():
    e = np.array([1.0, 0, 0, 0])
    d = group.geodesic_distance(e, group.translation_quaternions())
    np.testing.assert_allclose(d / 2, group.INJECTIVITY_RADIUS, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(unit4)
def test_reduction_lands_in_domain_and_stays_in_orbit(v):
    x = _unit(v)
    red, tau = group.reduce_to_domain(x)
    assert np.all(group.face_distances(red) >= -1e-10)
    np.testing.assert_allclose(group.quat_mul(tau.q, x), red, atol=1e-14)
    assert red[0] >= math.cos(group.D_MAX) - 1e-12


def test_reduction_is_constant_on_orbits(rng):
    x = random_unit_quaternions(rng, 200)
    red, _ = group.reduce_many(x)
    for g in group.group_quaternions()[::7]:
        red_g, _ = group.reduce_many(group.quat_mul(g[None], x))
        np.testing.assert_allclose(red_g, red, atol=1e-12)


def test_reduce_many_matches_single_point(rng):
    x = random_unit_quaternions(rng, 20)
    red, tau = group.reduce_many(x)
    for k in range(20):
        r, g = group.reduce_to_domain(x[k])
        np.testing.assert_allclose(r, red[k])
        assert g.index == tau[k]


def test_boundary_partner_class_sizes():
    dom = group.fundamental_domain()
    face = dom.vertices[np.array(dom.faces[0]) - 1]
    center = _unit(face.mean(axis=0))
    assert len(group.boundary_partner(center[1:])) == 2
    edge_mid = _unit(face[0] + face[1])
    assert len(group.boundary_partner(edge_mid[1:])) == 3
    assert len(group.boundary_partner(dom.vertices[0, 1:])) == 4
    with pytest.raises(ValueError, match="not a boundary point"):
        group.boundary_partner(np.zeros(3))


def test_face_partner_is_image_under_translation():
    dom = group.fundamental_domain()
    gs = group.translation_quaternions()
    face = dom.vertices[np.array(dom.faces[2]) - 1]
    p = _unit(face.mean(axis=0) + 0.1 * face[0])
    assert group.contains(p).kind == "face"
    partners = group.boundary_partner(p[1:])
    image = group.project(group.quat_mul(gs[2], p))
    assert np.min(np.abs(partners - image).max(axis=1)) < 1e-12


def test_lift_project_round_trip(rng):
    X = rng.uniform(-0.3, 0.3, (50, 3))
    np.testing.assert_allclose(group.project(group.lift(X)), X)
    with pytest.raises(ValueError):
        group.lift(np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        group.project(np.array([-0.5, 0.5, 0.5, 0.5]))


def test_geodesic_distance_rejects_non_unit_input():
    with pytest.raises(ValueError):
        group.geodesic_distance(np.array([2.0, 0, 0, 0]), np.array([1.0, 0, 0, 0]))
    assert group.geodesic_distance(np.array([1.0, 0, 0, 0]), np.array([0.0, 1, 0, 0])) == pytest.approx(math.pi / 2)


def test_quat_mul_matches_hamilton_rule():
    i, j, k = np.eye(4)[1], np.eye(4)[2], np.eye(4)[3]
    np.testing.assert_array_equal(group.quat_mul(i, j), k)
    np.testing.assert_array_equal(group.quat_mul(j, i), -k)
    np.testing.assert_array_equal(group.quat_mul(i, i), -np.eye(4)[0])


def test_index_of_rejects_non_members():
    with pytest.raises(ValueError):
        group.index_of(_unit([1.0, 0.1, 0, 0]))


def test_export_geometry(tmp_path):
    path = tmp_path / "geometry.txt"
    group.export_geometry(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "GROUP 120"
    assert "TRANSLATIONS 12" in lines and "VERTICES 20" in lines
    first = [float(v) for v in lines[1].split()[1:]]
    assert first == [1.0, 0.0, 0.0, 0.0]
