"""P2 finite elements on the projected domain with the S^3 metric weight.

The weak form of the Laplace-Beltrami operator in the projected chart is
``-(K + D)`` relative to the mass matrix ``M``::

    M_ij = int w e_i e_j
    K_ij = int w grad e_i . grad e_j
    D_ij = -int w (X . grad e_i)(X . grad e_j)

with ``w = (1 - |X|^2)^(-1/2)``.  Unknowns live on node classes; the basis
function of a class is the sum of the nodal basis functions of its members.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from ._jit import JIT_ENABLED, njit, prange
from .mesh import LOCAL_EDGES, TetMeshP2
from .quadrature import quadrature_31

_CHUNK = 4096


class AssemblyError(RuntimeError):
    pass


class LocationError(RuntimeError):
    pass


def _bary(xi):
    xi = np.asarray(xi, dtype=float)
    return np.concatenate([1.0 - xi.sum(axis=-1, keepdims=True), xi], axis=-1)


_GRAD_LAMBDA = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def shape_values(xi) -> np.ndarray:
    """P2 basis values at reference points ``xi`` (shape ``(..., 3)``) -> ``(..., 10)``."""
    lam = _bary(xi)
    vert = lam * (2.0 * lam - 1.0)
    edge = 4.0 * lam[..., LOCAL_EDGES[:, 0]] * lam[..., LOCAL_EDGES[:, 1]]
    return np.concatenate([vert, edge], axis=-1)


def shape_gradients(xi) -> np.ndarray:
    """Reference gradients ``(..., 10, 3)`` of the P2 basis."""
    lam = _bary(xi)
    g = _GRAD_LAMBDA
    vert = (4.0 * lam - 1.0)[..., :, None] * g
    a, b = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    edge = 4.0 * (lam[..., a, None] * g[b] + lam[..., b, None] * g[a])
    return np.concatenate([vert, edge], axis=-2)


def shape_eval(tet_vertices, xi):
    """Values and physical gradients of the 10 basis functions at ``xi``.

    ``tet_vertices`` is a ``(4, 3)`` array; pass ``None`` for reference
    gradients.
    """
    vals = shape_values(xi)
    grads = shape_gradients(xi)
    if tet_vertices is not None:
        v = np.asarray(tet_vertices, dtype=float)
        jac = (v[1:] - v[0]).T
        grads = grads @ np.linalg.inv(jac)
    return vals, grads


def _geometry(vertices, tets):
    p = vertices[tets]
    jac = np.transpose(p[:, 1:] - p[:, :1], (0, 2, 1))  # columns are edge vectors
    det = np.linalg.det(jac)
    inv = np.linalg.inv(jac)
    return p[:, 0], jac, det, inv


@dataclass
class SystemMatrices:
    M: sp.csr_matrix
    K: sp.csr_matrix
    D: sp.csr_matrix
    A: sp.csr_matrix = field(init=False)

    def __post_init__(self):
        self.A = (self.K + self.D).tocsr()
        self.A.sort_indices()

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def mass_diagonal(self) -> np.ndarray:
        return self.M.diagonal()

    def export(self, name: str, path) -> None:
        """Write one matrix in coordinate text format ``i j value``."""
        mat = getattr(self, name).tocoo()
        order = np.lexsort((mat.col, mat.row))
        with open(path, "w") as fh:
            for i, j, v in zip(mat.row[order], mat.col[order], mat.data[order]):
                fh.write(f"{i} {j} {v:.17g}\n")


@njit(cache=True, parallel=True)
def _element_matrices_nb(v0, jac, det, inv, qxi, qw, phi, dphi):
    nt = v0.shape[0]
    nq = qw.shape[0]
    me = np.zeros((nt, 10, 10))
    ke = np.zeros((nt, 10, 10))
    de = np.zeros((nt, 10, 10))
    bad = np.zeros(nt, dtype=np.bool_)
    for t in prange(nt):
        g = np.empty((10, 3))
        xg = np.empty(10)
        for q in range(nq):
            x = np.empty(3)
            for r in range(3):
                x[r] = v0[t, r] + jac[t, r, 0] * qxi[q, 0] + jac[t, r, 1] * qxi[q, 1] + jac[t, r, 2] * qxi[q, 2]
            r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
            if r2 >= 1.0:
                bad[t] = True
                continue
            wq = qw[q] * abs(det[t]) / np.sqrt(1.0 - r2)
            for i in range(10):
                for c in range(3):
                    g[i, c] = dphi[q, i, 0] * inv[t, 0, c] + dphi[q, i, 1] * inv[t, 1, c] + dphi[q, i, 2] * inv[t, 2, c]
                xg[i] = x[0] * g[i, 0] + x[1] * g[i, 1] + x[2] * g[i, 2]
            for i in range(10):
                for j in range(10):
                    me[t, i, j] += wq * phi[q, i] * phi[q, j]
                    ke[t, i, j] += wq * (g[i, 0] * g[j, 0] + g[i, 1] * g[j, 1] + g[i, 2] * g[j, 2])
                    de[t, i, j] -= wq * xg[i] * xg[j]
    return me, ke, de, bad


def _element_matrices_np(v0, jac, det, inv, qxi, qw, phi, dphi):
    nt = len(v0)
    me = np.empty((nt, 10, 10))
    ke = np.empty((nt, 10, 10))
    de = np.empty((nt, 10, 10))
    bad = np.zeros(nt, dtype=bool)
    for s in range(0, nt, _CHUNK):
        sl = slice(s, min(s + _CHUNK, nt))
        x = v0[sl, None, :] + np.einsum("trc,qc->tqr", jac[sl], qxi)
        r2 = np.einsum("tqr,tqr->tq", x, x)
        bad[sl] = np.any(r2 >= 1.0, axis=1)
        w = qw[None, :] * np.abs(det[sl])[:, None] / np.sqrt(np.clip(1.0 - r2, 1e-300, None))
        g = np.einsum("qic,tcr->tqir", dphi, inv[sl])
        xg = np.einsum("tqir,tqr->tqi", g, x)
        me[sl] = np.einsum("tq,qi,qj->tij", w, phi, phi)
        ke[sl] = np.einsum("tq,tqir,tqjr->tij", w, g, g)
        de[sl] = -np.einsum("tq,tqi,tqj->tij", w, xg, xg)
    return me, ke, de, bad


def element_matrices(mesh: TetMeshP2, use_jit: bool | None = None):
    """Element mass, stiffness and metric-correction matrices ``(n_tets, 10, 10)``."""
    rule = quadrature_31()
    qxi = np.ascontiguousarray(rule.points)
    qw = np.ascontiguousarray(rule.weights)
    phi = shape_values(qxi)
    dphi = shape_gradients(qxi)
    v0, jac, det, inv = _geometry(mesh.vertices, mesh.tets)
    if use_jit is None:
        use_jit = JIT_ENABLED
    kernel = _element_matrices_nb if use_jit else _element_matrices_np
    me, ke, de, bad = kernel(v0, jac, det, inv, qxi, qw, phi, dphi)
    if np.any(bad):
        raise AssemblyError(
            f"|X| >= 1 at a quadrature point in tet {int(np.flatnonzero(bad)[0])}"
        )
    return me, ke, de


def _scatter(local, dof, n):
    rows = np.repeat(dof, 10, axis=1).ravel()
    cols = np.tile(dof, (1, 10)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble(mesh: TetMeshP2, by_class: bool = True, use_jit: bool | None = None) -> SystemMatrices:
    """Assemble ``M``, ``K`` and ``D`` over node classes (or raw nodes)."""
    me, ke, de = element_matrices(mesh, use_jit)
    if by_class:
        dof = mesh.tet_classes
        n = mesh.n_classes
    else:
        dof = mesh.tet_nodes
        n = mesh.n_nodes
    return SystemMatrices(_scatter(me, dof, n), _scatter(ke, dof, n), _scatter(de, dof, n))


def class_expansion(mesh: TetMeshP2) -> sp.csr_matrix:
    """``P`` with ``P[node, class] = 1``; nodal values are ``P @ U``."""
    n = mesh.n_nodes
    return sp.csr_matrix((np.ones(n), (np.arange(n), mesh.node_class)), shape=(n, mesh.n_classes))


def nodal_values(mesh: TetMeshP2, U) -> np.ndarray:
    return np.asarray(U)[mesh.node_class]


def interpolate(mesh: TetMeshP2, func) -> np.ndarray:
    """Class vector from ``func(points (n, 3)) -> (n,)``.

    Each class takes the value at its first member node; ``func`` should be
    compatible with the gluing for the result to be meaningful.
    """
    values = np.asarray(func(mesh.nodes), dtype=float)
    U = np.empty(mesh.n_classes)
    U[mesh.node_class[::-1]] = values[::-1]
    return U


class TetDiagnostics:
    """Per-tet operators evaluated at centroids.

    ``centroid_ops @ U_local`` gives ``u_h(G_T)`` and ``laplacian_ops @ U_local``
    gives ``Delta u_h(G_T)`` for the operator
    ``(delta_ij - X_i X_j) d_i d_j u - 3 X . grad u``.
    """

    def __init__(self, mesh: TetMeshP2):
        self.mesh = mesh
        v0, jac, det, inv = _geometry(mesh.vertices, mesh.tets)
        self.centroids = mesh.vertices[mesh.tets].mean(axis=1)
        # physical gradients of the barycentric coordinates: (T, 4, 3)
        glam = np.einsum("kc,tcr->tkr", _GRAD_LAMBDA, inv)
        G = self.centroids
        a, b = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
        grad = np.concatenate([np.zeros((len(G), 4, 3)), glam[:, a] + glam[:, b]], axis=1)
        hess_v = 4.0 * np.einsum("tkr,tks->tkrs", glam, glam)
        hess_e = 4.0 * (
            np.einsum("tkr,tks->tkrs", glam[:, a], glam[:, b])
            + np.einsum("tkr,tks->tkrs", glam[:, b], glam[:, a])
        )
        hess = np.concatenate([hess_v, hess_e], axis=1)
        metric = np.eye(3)[None] - np.einsum("tr,ts->trs", G, G)
        self.laplacian_ops = np.einsum("trs,tirs->ti", metric, hess) - 3.0 * np.einsum(
            "tr,tir->ti", G, grad
        )
        self.centroid_ops = np.tile(np.r_[np.full(4, -0.125), np.full(6, 0.25)], (len(G), 1))
        rule = quadrature_31()
        x = v0[:, None, :] + np.einsum("trc,qc->tqr", jac, rule.points)
        w = 1.0 / np.sqrt(1.0 - np.einsum("tqr,tqr->tq", x, x))
        self.weighted_volumes = np.abs(det) * (w @ rule.weights)
        self.tet_classes = mesh.tet_classes

    def laplacian_at_centroids(self, U) -> np.ndarray:
        return np.einsum("ti,ti->t", self.laplacian_ops, np.asarray(U)[self.tet_classes])

    def values_at_centroids(self, U) -> np.ndarray:
        return np.einsum("ti,ti->t", self.centroid_ops, np.asarray(U)[self.tet_classes])


def eval_delav(mesh: TetMeshP2, U, tet: int) -> float:
    """Value of the Laplace-Beltrami operator of ``u_h`` at the centroid of ``tet``."""
    v = mesh.vertices[mesh.tets[tet]]
    G = v.mean(axis=0)
    jac = (v[1:] - v[0]).T
    inv = np.linalg.inv(jac)
    glam = _GRAD_LAMBDA @ inv
    u = np.asarray(U)[mesh.tet_classes[tet]]
    grad = np.zeros(3)
    hess = np.zeros((3, 3))
    for k in range(4):
        hess += u[k] * 4.0 * np.outer(glam[k], glam[k])
    for e, (a, b) in enumerate(LOCAL_EDGES):
        ue = u[4 + e]
        grad += ue * (glam[a] + glam[b])
        hess += ue * 4.0 * (np.outer(glam[a], glam[b]) + np.outer(glam[b], glam[a]))
    return float(np.trace((np.eye(3) - np.outer(G, G)) @ hess) - 3.0 * G @ grad)


class Locator:
    """Point location in the tetrahedral mesh with P2 evaluation.

    Points in the thin gap between a straight boundary facet and the curved
    face are assigned to the nearest tet (bounded barycentric extrapolation).
    """

    def __init__(self, mesh: TetMeshP2, outside_tol: float = 0.25, k: int = 12):
        self.mesh = mesh
        self.outside_tol = outside_tol
        self.k = min(k, len(mesh.tets))
        v0, _, _, inv = _geometry(mesh.vertices, mesh.tets)
        self._v0 = v0
        self._inv = inv
        self._tree = cKDTree(mesh.vertices[mesh.tets].mean(axis=1))

    def _bary(self, points, tets):
        xi = np.einsum("nrc,nc->nr", self._inv[tets], points - self._v0[tets])
        return _bary(xi)

    def locate(self, points):
        """Return tet ids and barycentric coordinates ``(n, 4)``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        _, cand = self._tree.query(points, k=self.k)
        cand = cand.reshape(len(points), -1)
        n, k = cand.shape
        lam = self._bary(np.repeat(points, k, axis=0), cand.ravel()).reshape(n, k, 4)
        score = lam.min(axis=2)
        best = np.argmax(score, axis=1)
        rows = np.arange(n)
        tets = cand[rows, best]
        worst = score[rows, best]
        miss = worst < -1e-12
        if np.any(miss):
            # exhaustive search for the few points not inside a candidate
            for i in np.flatnonzero(miss):
                lam_all = self._bary(np.repeat(points[i : i + 1], len(self.mesh.tets), axis=0),
                                     np.arange(len(self.mesh.tets)))
                s = lam_all.min(axis=1)
                j = int(np.argmax(s))
                if s[j] > worst[i]:
                    tets[i], worst[i] = j, s[j]
        if np.any(worst < -self.outside_tol):
            i = int(np.argmin(worst))
            raise LocationError(f"point {points[i]} is outside the mesh")
        return tets, self._bary(points, tets)

    def evaluate(self, U, points) -> np.ndarray:
        tets, lam = self.locate(points)
        vert = lam * (2.0 * lam - 1.0)
        edge = 4.0 * lam[:, LOCAL_EDGES[:, 0]] * lam[:, LOCAL_EDGES[:, 1]]
        phi = np.concatenate([vert, edge], axis=1)
        return np.einsum("ni,ni->n", phi, np.asarray(U)[self.mesh.tet_classes[tets]])


def locate_and_eval(mesh: TetMeshP2, U, X) -> float | np.ndarray:
    """P2 value of the class vector ``U`` at point(s) ``X`` of the projected domain."""
    X = np.asarray(X, dtype=float)
    vals = Locator(mesh).evaluate(U, X.reshape(-1, 3))
    return float(vals[0]) if X.ndim == 1 else vals
