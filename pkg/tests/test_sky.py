import math

import numpy as np
import pytest

from dodecawave import acceptance, evolution, fem, group, sky


@pytest.fixture(scope="module")
def locator1(mesh1):
    return fem.Locator(mesh1)


def test_sphere_angles_invert_sphere_points(rng):
    th = rng.uniform(0.01, math.pi - 0.01, 30)
    ph = rng.uniform(0, 2 * math.pi, 30)
    x = sky.sphere_points(0.7, th, ph)
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0)
    np.testing.assert_allclose(np.arccos(x[:, 0]), 0.7)
    t2, p2 = sky.sphere_angles(x)
    np.testing.assert_allclose(t2, th, atol=1e-12)
    np.testing.assert_allclose(p2, ph, atol=1e-12)


def test_constant_field_gives_a_third(mesh1, locator1):
    m = sky.sky_map(mesh1, np.full(mesh1.n_classes, 1.5), 0.9, 16, 32, locator1)
    np.testing.assert_allclose(m.values, 0.5, atol=1e-13)
    assert m.dynamic_range < 1e-12
    assert m.values.shape == (16, 32)
    assert m.theta[0] == pytest.approx(math.pi / 32) and m.phi[1] == pytest.approx(2 * math.pi / 32)


def test_small_sphere_inside_flat_bump_is_nearly_uniform(mesh1, locator1):
    U = evolution.init_bump(mesh1, evolution.InitSpec([evolution.Bump((0, 0, 0), 0.3)]))
    m = sky.sky_map(mesh1, U, 0.01, 8, 16, locator1)
    centre = U.max() / 3
    assert np.abs(m.values - centre).max() < 0.01 * centre


def test_field_on_sphere_is_invariant_under_the_group(mesh1, locator1, rng):
    U = evolution.init_bump(mesh1, evolution.init_preset("init3"))
    x = rng.standard_normal((50, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    g = group.group_quaternions()[41]
    a = sky.field_on_sphere(mesh1, U, x, locator1)
    b = sky.field_on_sphere(mesh1, U, group.quat_mul(g[None, :], x), locator1)
    np.testing.assert_allclose(a, b, atol=1e-9 * np.abs(U).max())


def test_grid_checks():
    with pytest.raises(ValueError):
        sky.SkyMap(0.0, np.zeros(1), np.zeros(1), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        sky.sky_map(None, None, 0.5, 0, 4)


def test_bilinear_sampling_reproduces_linear_data():
    th = (np.arange(20) + 0.5) * math.pi / 20
    ph = np.arange(40) * 2 * math.pi / 40
    vals = np.broadcast_to(2.0 * th[:, None] + 0.0 * ph[None, :], (20, 40)).copy()
    m = sky.SkyMap(0.5, th, ph, vals)
    q = np.array([0.5, 1.0, 2.7])
    np.testing.assert_allclose(m.sample(q, np.array([0.1, 3.0, 6.27])), 2 * q)


def test_circle_geometry():
    assert sky.circle_pairs(group.INJECTIVITY_RADIUS) == []
    chi = 0.6
    pairs = sky.circle_pairs(chi, 36)
    assert len(pairs) == 6
    for (x, y), g in zip(pairs, group.clifford_translations()[:6]):
        # both points lie on the sphere around the observer
        np.testing.assert_allclose(x[:, 0], math.cos(chi), atol=1e-12)
        np.testing.assert_allclose(y[:, 0], math.cos(chi), atol=1e-12)
        # and y is the image of x under g^-1
        np.testing.assert_allclose(group.quat_mul(g.q[None, :], y), x, atol=1e-12)


def test_circle_residual_detects_non_invariant_maps():
    th = (np.arange(64) + 0.5) * math.pi / 64
    ph = np.arange(128) * 2 * math.pi / 128
    vals = np.cos(th)[:, None] * np.ones(128)
    rep = sky.circle_residual(sky.SkyMap(0.6, th, ph, vals))
    assert rep.n_pairs == 6 and rep.ratio > 0.1


def test_matched_circles_in_an_evolved_field(mesh1, locator1):
    traj = acceptance.init2_run("desitter", 6.5)
    for chi in (0.45, 0.8):
        rep = sky.circle_residual(sky.sky_map(mesh1, traj.final, chi, 128, 256, locator1))
        assert rep.n_pairs == 6
        assert rep.ratio <= 0.05


def test_write_sky(tmp_path):
    th = (np.arange(3) + 0.5) * math.pi / 3
    ph = np.arange(4) * math.pi / 2
    vals = np.arange(12.0).reshape(3, 4)
    tsv, pgm = sky.write_sky(sky.SkyMap(0.5, th, ph, vals), tmp_path)
    assert tsv.name == "sky_chi0.500000.tsv" and pgm.name == "sky_chi0.500000.pgm"
    rows = [r for r in tsv.read_text().splitlines() if not r.startswith("#")]
    assert len(rows) == 12
    assert [float(v) for v in rows[5].split()] == pytest.approx([th[1], ph[1], 5.0])
    pix, lo, hi = sky.read_pgm(pgm)
    assert (lo, hi) == (0.0, 11.0)
    assert pix.shape == (3, 4) and pix.min() == 0 and pix.max() == 65535
    flat = sky.write_sky(sky.SkyMap(0.5, th, ph, np.ones((3, 4))), tmp_path / "flat")[1]
    assert not sky.read_pgm(flat)[0].any()


def test_parse_elements():
    tr = group.clifford_translations()
    assert sky.parse_elements("g1") == [tr[0].index]
    composed = sky.parse_elements("g2*g6")[0]
    expected = group.index_of(group.quat_mul(tr[1].q, tr[5].q))
    assert composed == expected
    assert sky.parse_elements("id, 17") == [group.index_of(np.array([1.0, 0, 0, 0])), 17]
    assert len(sky.neighbour_cells()) == 13
    for bad in ("g13", "x", "", "120"):
        with pytest.raises(ValueError):
            sky.parse_elements(bad)


def test_tiling_export(mesh1, tmp_path):
    U = evolution.init_bump(mesh1, evolution.init_preset("init3"))
    cells = sky.neighbour_cells()
    path = tmp_path / "tiling.txt"
    sky.tiling_export(mesh1, U, cells, path)
    assert path.read_text().startswith("# tiling")
    data = sky.read_tiling(path)
    assert sorted(data) == sorted(cells)
    ident = data[cells[0]]
    np.testing.assert_allclose(ident[:, :3], mesh1.vertices, atol=1e-15)
    base = group.lift(mesh1.vertices)
    values = fem.nodal_values(mesh1, U)[: mesh1.n_vertices]
    for k in cells[1:]:
        g = group.group_quaternions()[k]
        image = group.quat_mul(g[None, :], base)
        # the image of the domain centre lies outside the domain
        assert group.contains(g).kind == "outside"
        # the image shares one face with the domain and the field agrees on it
        d = np.linalg.norm(image[:, None, :] - base[None, :, :], axis=2)
        i, j = np.nonzero(d < 1e-9)
        assert len(i) >= 3
        np.testing.assert_allclose(values[i], values[j], atol=1e-9)
