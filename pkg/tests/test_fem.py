import numpy as np
import pytest
import scipy.linalg as sl
import scipy.sparse.linalg as sla
from scipy.integrate import tplquad

from dodecawave import fem, group, mesh
from dodecawave.quadrature import quadrature_31

REF_NODES = np.array(
    [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
     [0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5], [0.5, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0.5]]
)


def test_shape_functions_are_nodal():
    np.testing.assert_allclose(fem.shape_values(REF_NODES), np.eye(10), atol=1e-15)


def test_partition_of_unity(rng):
    xi = rng.dirichlet(np.ones(4), 50)[:, 1:]
    np.testing.assert_allclose(fem.shape_values(xi).sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(fem.shape_gradients(xi).sum(axis=1), 0.0, atol=1e-13)


def test_physical_gradients_match_finite_differences(rng):
    verts = np.array([[0.0, 0, 0], [0.2, 0.01, 0], [0.03, 0.15, 0.02], [0.01, 0.02, 0.18]])
    xi = np.array([0.2, 0.3, 0.1])
    _, grads = fem.shape_eval(verts, xi)
    jac = (verts[1:] - verts[0]).T
    h = 1e-6
    for c in range(3):
        step = np.linalg.solve(jac, np.eye(3)[c] * h)
        fd = (fem.shape_values(xi + step) - fem.shape_values(xi - step)) / (2 * h)
        np.testing.assert_allclose(grads[:, c], fd, atol=1e-6)
    _, ref = fem.shape_eval(None, xi)
    np.testing.assert_allclose(ref, fem.shape_gradients(xi))


def test_element_matrices_match_adaptive_quadrature(mesh0):
    # one tet against scipy's adaptive cubature in reference coordinates
    me, ke, de = fem.element_matrices(mesh0)
    t = 7
    v = mesh0.vertices[mesh0.tets[t]]
    jac = (v[1:] - v[0]).T
    inv = np.linalg.inv(jac)
    det = abs(np.linalg.det(jac))
    i, j = 2, 8

    def integrand(z, y, x, which):
        xi = np.array([x, y, z])
        X = v[0] + jac @ xi
        w = det / np.sqrt(1 - X @ X)
        phi = fem.shape_values(xi)
        g = fem.shape_gradients(xi) @ inv
        if which == "M":
            return w * phi[i] * phi[j]
        if which == "K":
            return w * g[i] @ g[j]
        return -w * (X @ g[i]) * (X @ g[j])

    for which, mat in (("M", me), ("K", ke), ("D", de)):
        ref, _ = tplquad(integrand, 0, 1, lambda x: 0, lambda x: 1 - x,
                         lambda x, y: 0, lambda x, y: 1 - x - y, args=(which,), epsabs=1e-13, epsrel=1e-11)
        # the 31-point rule is exact only for the polynomial part of the weight
        assert mat[t, i, j] == pytest.approx(ref, rel=1e-5, abs=1e-14)


def test_compiled_and_numpy_assembly_agree(mesh1):
    a = fem.element_matrices(mesh1, use_jit=True)
    b = fem.element_matrices(mesh1, use_jit=False)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-16)


def test_matrices_symmetric_and_annihilate_constants(system1):
    for mat in (system1.M, system1.K, system1.D, system1.A):
        assert abs(mat - mat.T).max() < 1e-15
    ones = np.ones(system1.n)
    assert np.abs(system1.A @ ones).max() < 1e-13
    assert np.all(np.linalg.eigvalsh(system1.M.toarray()) > 0)


@pytest.mark.parametrize("level, rel", [(0, 0.025), (1, 6e-3), (2, 1.5e-3)])
def test_volume_converges_to_pi_squared_over_sixty(level, rel, request):
    m = request.getfixturevalue(f"mesh{level}")
    sysm = fem.assemble(m)
    ones = np.ones(sysm.n)
    vol = ones @ (sysm.M @ ones)
    assert abs(vol / (np.pi**2 / 60) - 1) < rel


def test_node_and_class_assembly_are_consistent(mesh1, system1):
    raw = fem.assemble(mesh1, by_class=False)
    P = fem.class_expansion(mesh1)
    np.testing.assert_allclose((P.T @ raw.M @ P).toarray(), system1.M.toarray(), atol=1e-15)


def test_first_eigenvalue_cluster_approaches_168(system1, system2):
    # first nonzero eigenvalue of -Laplacian on the quotient is 13^2 - 1 with multiplicity 13
    w1 = sl.eigh(system1.A.toarray(), system1.M.toarray(), eigvals_only=True)[:15]
    w2 = np.sort(sla.eigsh(system2.A, k=15, M=system2.M, sigma=-1.0, which="LM")[0])
    assert abs(w1[0]) < 1e-8 and abs(w2[0]) < 1e-8
    # 13 eigenvalues in the cluster, well separated from the next one
    assert w1[14] > 1.5 * w1[13] and w2[14] > 1.5 * w2[13]
    err1 = abs(w1[1:14].mean() - 168)
    err2 = abs(w2[1:14].mean() - 168)
    assert err2 < err1 and err2 < 0.1 * 168


def test_interpolation_and_evaluation_reproduce_quadratics(mesh1, rng):
    f = lambda X: 1 + X[:, 0] - 2 * X[:, 1] * X[:, 2] + 3 * X[:, 0] ** 2
    U = fem.interpolate(mesh1, f)
    pts = rng.uniform(-0.1, 0.1, (40, 3))
    np.testing.assert_allclose(fem.locate_and_eval(mesh1, U, pts), f(pts), atol=1e-13)
    assert fem.locate_and_eval(mesh1, U, pts[0]) == pytest.approx(f(pts[:1])[0], abs=1e-13)


def test_laplacian_diagnostic_on_quadratic(mesh1):
    # Delta |X|^2 = 6 - 8|X|^2 in the projected chart
    U = fem.interpolate(mesh1, lambda X: np.sum(X * X, axis=1))
    diag = fem.TetDiagnostics(mesh1)
    G = diag.centroids
    kinds = mesh1.class_kind[mesh1.tet_classes]
    inner = np.all((kinds == mesh.KIND_INTERIOR) | (kinds == mesh.KIND_MIDPOINT), axis=1)
    assert inner.sum() >= 40
    ref = 6 - 8 * np.sum(G * G, axis=1)
    lap = diag.laplacian_at_centroids(U)
    np.testing.assert_allclose(lap[inner], ref[inner], atol=1e-10)
    for t in np.flatnonzero(inner)[:5]:
        assert fem.eval_delav(mesh1, U, t) == pytest.approx(lap[t], abs=1e-10)


def test_centroid_values(mesh1):
    f = lambda X: 2 + X[:, 0] * X[:, 1]
    U = fem.interpolate(mesh1, f)
    diag = fem.TetDiagnostics(mesh1)
    inner = np.linalg.norm(diag.centroids, axis=1) < 0.2
    np.testing.assert_allclose(diag.values_at_centroids(U)[inner], f(diag.centroids)[inner], atol=1e-13)
    assert diag.weighted_volumes.sum() == pytest.approx(np.pi**2 / 60, rel=0.01)


def test_locator_covers_boundary_gap_and_rejects_far_points(mesh1):
    loc = fem.Locator(mesh1)
    # a point on the curved face, outside every straight tet
    v = group.domain_vertices()
    face = v[np.array(group.fundamental_domain().faces[0]) - 1]
    x = face.mean(axis=0)
    x /= np.linalg.norm(x)
    tets, lam = loc.locate(x[None, 1:])
    assert lam.min() > -0.25
    with pytest.raises(fem.LocationError):
        loc.locate(np.array([[0.9, 0.0, 0.0]]))


def test_constant_field_evaluates_exactly(mesh1, rng):
    U = np.full(mesh1.n_classes, 2.5)
    x = rng.standard_normal((200, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    pts = group.project(group.reduce_many(x)[0])
    np.testing.assert_allclose(fem.Locator(mesh1).evaluate(U, pts), 2.5, atol=1e-14)


def test_export_format(system0, tmp_path):
    path = tmp_path / "M.txt"
    system0.export("M", path)
    rows = [line.split() for line in path.read_text().splitlines()]
    assert len(rows) == system0.M.nnz
    i, j, v = rows[0]
    assert float(v) == system0.M[int(i), int(j)]


def test_quadrature_point_outside_unit_ball_is_an_error():
    bad = mesh.TetMeshP2(np.array([[0.0, 0, 0], [1.5, 0, 0], [0, 1.5, 0], [0, 0, 1.5]]), np.array([[0, 1, 2, 3]]), 0)
    with pytest.raises(fem.AssemblyError):
        fem.element_matrices(bad)
