"""Tetrahedral P2 meshes of the projected fundamental domain.

The level-0 mesh joins the center to each of the 12 curved pentagons, fanned
into five triangles from the face barycenter (60 tetrahedra).  Each level
applies 8-way red refinement; new vertices on boundary triangles are placed
on the exact curved face so that the face gluing maps boundary vertices onto
boundary vertices.

Nodes are numbered vertices first, then edge midpoints in the order of
:attr:`TetMeshP2.edges`.  Each node belongs to exactly one class; class kinds
are

1. interior vertex,
2. vertex of the domain (five classes of four),
3. vertex inside a face (pairs),
4. vertex on an edge of the domain (triples),
5. edge midpoint (singletons).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree

from . import group

MAX_LEVEL = 5
LOCAL_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
MATCH_TOL = 1e-8

KIND_INTERIOR = 1
KIND_DOMAIN_VERTEX = 2
KIND_FACE = 3
KIND_EDGE = 4
KIND_MIDPOINT = 5


class MeshError(RuntimeError):
    pass


class MeshFormatError(ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass
class TetMeshP2:
    vertices: np.ndarray
    tets: np.ndarray
    level: int
    edges: np.ndarray = field(init=False)
    tet_edges: np.ndarray = field(init=False)
    node_class: np.ndarray | None = None
    class_kind: np.ndarray | None = None
    boundary_tris: np.ndarray | None = None
    boundary_tri_face: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        self.edges, self.tet_edges = _edge_numbering(self.tets)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_nodes(self) -> int:
        return len(self.vertices) + len(self.edges)

    @property
    def n_classes(self) -> int:
        return len(self.class_kind)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @property
    def nodes(self) -> np.ndarray:
        """Coordinates of all P2 nodes (vertices, then midpoints)."""
        return np.vstack([self.vertices, self.midpoints])

    @property
    def tet_nodes(self) -> np.ndarray:
        """``(n_tets, 10)`` node ids: 4 vertices then edges 01, 02, 03, 12, 13, 23."""
        return np.hstack([self.tets, self.tet_edges + self.n_vertices])

    @property
    def tet_classes(self) -> np.ndarray:
        return self.node_class[self.tet_nodes]

    def volumes(self) -> np.ndarray:
        return signed_volumes(self.vertices, self.tets)

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return np.linalg.norm(d, axis=1)

    def h_max(self) -> float:
        return float(self.edge_lengths().max())

    def h_min(self) -> float:
        return float(self.edge_lengths().min())

    def classes(self) -> list[np.ndarray]:
        """Node ids of each class, in class order."""
        order = np.argsort(self.node_class, kind="stable")
        bounds = np.searchsorted(self.node_class[order], np.arange(self.n_classes + 1))
        return [order[bounds[c] : bounds[c + 1]] for c in range(self.n_classes)]

    def boundary_vertex_ids(self) -> np.ndarray:
        kinds = self.class_kind[self.node_class[: self.n_vertices]]
        return np.flatnonzero((kinds >= KIND_DOMAIN_VERTEX) & (kinds <= KIND_EDGE))


def signed_volumes(vertices, tets) -> np.ndarray:
    p = vertices[tets]
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 0]
    c = p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


def _edge_numbering(tets):
    pairs = np.sort(tets[:, LOCAL_EDGES].reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    return edges, inverse.reshape(len(tets), 6)


def _orient(vertices, tets):
    neg = signed_volumes(vertices, tets) < 0
    tets = tets.copy()
    tets[neg, 2], tets[neg, 3] = tets[neg, 3].copy(), tets[neg, 2].copy()
    return tets


def _on_curved_face(a, b):
    """Geodesic midpoint of two projected points on the same face plane."""
    m = group.lift(a) + group.lift(b)
    m /= np.linalg.norm(m, axis=-1, keepdims=True)
    return group.project(m)


def base_mesh():
    """Level-0 vertices, tets and boundary triangles with face ids."""
    dom = group.fundamental_domain()
    center = np.zeros((1, 3))
    corners = group.project(dom.vertices)
    face_centers = []
    for cycle in dom.faces:
        s = dom.vertices[np.array(cycle) - 1].sum(axis=0)
        face_centers.append(s / np.linalg.norm(s))
    face_centers = group.project(np.array(face_centers))
    vertices = np.vstack([center, corners, face_centers])
    tets, tris, tri_face = [], [], []
    for f, cycle in enumerate(dom.faces):
        c = 21 + f
        for k in range(5):
            a, b = cycle[k], cycle[(k + 1) % 5]
            tets.append((0, c, a, b))
            tris.append((c, a, b))
            tri_face.append(f)
    tets = _orient(vertices, np.array(tets))
    return vertices, tets, np.array(tris), np.array(tri_face)


def refine(vertices, tets, tris, tri_face):
    """One step of red refinement, keeping boundary vertices on the curved faces."""
    edges, tet_edges = _edge_numbering(tets)
    nv = len(vertices)
    mids = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])

    tri_pairs = np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    edge_index = {tuple(e): k for k, e in enumerate(edges)}
    tri_edges = np.array([edge_index[tuple(p)] for p in tri_pairs]).reshape(-1, 3)
    bnd = np.unique(tri_edges)
    mids[bnd] = _on_curved_face(vertices[edges[bnd, 0]], vertices[edges[bnd, 1]])
    new_vertices = np.vstack([vertices, mids])

    v = tets
    m = tet_edges + nv
    m01, m02, m03, m12, m13, m23 = (m[:, k] for k in range(6))
    children = [
        np.stack([v[:, 0], m01, m02, m03], axis=1),
        np.stack([m01, v[:, 1], m12, m13], axis=1),
        np.stack([m02, m12, v[:, 2], m23], axis=1),
        np.stack([m03, m13, m23, v[:, 3]], axis=1),
    ]
    diag_len = np.stack(
        [
            np.linalg.norm(new_vertices[m01] - new_vertices[m23], axis=1),
            np.linalg.norm(new_vertices[m02] - new_vertices[m13], axis=1),
            np.linalg.norm(new_vertices[m03] - new_vertices[m12], axis=1),
        ],
        axis=1,
    )
    choice = np.argmin(diag_len, axis=1)
    # diagonal (p, q) and the 4-cycle of the remaining octahedron vertices
    options = [
        (m01, m23, (m02, m03, m13, m12)),
        (m02, m13, (m01, m03, m23, m12)),
        (m03, m12, (m01, m02, m23, m13)),
    ]
    octa = np.empty((len(tets), 4, 4), dtype=np.int64)
    for k, (p, q, ring) in enumerate(options):
        sel = choice == k
        for i in range(4):
            octa[sel, i] = np.stack(
                [p[sel], q[sel], ring[i][sel], ring[(i + 1) % 4][sel]], axis=1
            )
    per_tet = np.concatenate([np.stack(children, axis=1), octa], axis=1)
    new_tets = _orient(new_vertices, per_tet.reshape(-1, 4))

    te = tri_edges + nv
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    mab, mbc, mca = te[:, 0], te[:, 1], te[:, 2]
    new_tris = np.stack(
        [
            np.stack([a, mab, mca], axis=1),
            np.stack([mab, b, mbc], axis=1),
            np.stack([mca, mbc, c], axis=1),
            np.stack([mab, mbc, mca], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    new_face = np.repeat(tri_face, 4)
    return new_vertices, new_tets, new_tris, new_face


def build_mesh(level: int) -> TetMeshP2:
    """Mesh of the projected domain with ``60 * 8**level`` tetrahedra."""
    if not isinstance(level, (int, np.integer)) or level < 0:
        raise ValueError("level must be a non-negative integer")
    if level > MAX_LEVEL:
        raise ValueError(f"level must be at most {MAX_LEVEL}")
    vertices, tets, tris, tri_face = base_mesh()
    for _ in range(level):
        vertices, tets, tris, tri_face = refine(vertices, tets, tris, tri_face)
    mesh = TetMeshP2(vertices, tets, int(level))
    mesh.boundary_tris = tris
    mesh.boundary_tri_face = tri_face
    classify_nodes(mesh)
    return mesh


def vertex_faces(vertices, tol=1e-9):
    """Boolean ``(n, 12)`` matrix of the faces each projected point lies on."""
    s = group.face_distances(group.lift(vertices))
    return np.abs(s) <= tol


def classify_nodes(mesh: TetMeshP2) -> TetMeshP2:
    """Fill ``mesh.node_class`` and ``mesh.class_kind`` in place.

    Boundary vertices are matched with the images of their lifts under the
    gluing translation of every face they lie on.
    """
    nv = mesh.n_vertices
    on_face = vertex_faces(mesh.vertices)
    n_faces = on_face.sum(axis=1)
    if np.any(n_faces > 3):
        raise MeshError("vertex lies on more than three faces")
    bnd = np.flatnonzero(n_faces > 0)
    tree = cKDTree(mesh.vertices[bnd])
    gs = group.translation_quaternions()
    rows, cols = [], []
    lifted = group.lift(mesh.vertices[bnd])
    for f in range(12):
        sel = np.flatnonzero(on_face[bnd, f])
        if len(sel) == 0:
            continue
        images = group.project(group.quat_mul(gs[f], lifted[sel]))
        dist, idx = tree.query(images)
        if np.any(dist > MATCH_TOL):
            raise MeshError(f"boundary vertex on face {f + 1} has no partner vertex")
        rows.append(bnd[sel])
        cols.append(bnd[idx])
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nv, nv))
    _, labels = connected_components(graph, directed=False)

    # relabel: vertex classes by smallest member, then midpoints in edge order
    first = {}
    for node, lab in enumerate(labels):
        first.setdefault(lab, node)
    order = sorted(first, key=first.get)
    relabel = np.empty(len(order), dtype=np.int64)
    relabel[order] = np.arange(len(order))
    vclass = relabel[labels]
    n_vclass = len(order)
    node_class = np.concatenate([vclass, n_vclass + np.arange(len(mesh.edges))])

    kind_of_count = np.array([KIND_INTERIOR, KIND_FACE, KIND_EDGE, KIND_DOMAIN_VERTEX])
    class_kind = np.empty(n_vclass + len(mesh.edges), dtype=np.int64)
    class_kind[vclass] = kind_of_count[n_faces]
    class_kind[n_vclass:] = KIND_MIDPOINT

    sizes = np.bincount(vclass, minlength=n_vclass)
    expected = np.array([1, 2, 3, 4])[n_faces]
    if np.any(sizes[vclass] != expected):
        raise MeshError("node class sizes inconsistent with the face gluing")

    mesh.node_class = node_class
    mesh.class_kind = class_kind
    _check_midpoints(mesh)
    return mesh


def _check_midpoints(mesh):
    s = group.face_distances(group.lift(mesh.midpoints))
    if np.any(np.abs(s) <= group.BOUNDARY_TOL):
        raise MeshError("an edge midpoint lies on the domain boundary")
    if np.any(s < -group.BOUNDARY_TOL):
        raise MeshError("an edge midpoint lies outside the domain")


def write_mesh(mesh: TetMeshP2, path) -> None:
    lines = [f"# dodecawave mesh level {mesh.level}", f"VERTICES {mesh.n_vertices}"]
    for k, p in enumerate(mesh.vertices):
        lines.append(f"{k} {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}")
    lines.append(f"TETS {len(mesh.tets)}")
    for k, t in enumerate(mesh.tets):
        lines.append(f"{k} {t[0]} {t[1]} {t[2]} {t[3]}")
    lines.append(f"CLASSES {mesh.n_classes}")
    for c, members in enumerate(mesh.classes()):
        lines.append(f"{c} {mesh.class_kind[c]} " + " ".join(str(n) for n in members))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write mesh file {path}: {exc}") from exc


def _section(lines, pos, name):
    while pos < len(lines) and (not lines[pos].strip() or lines[pos].startswith("#")):
        pos += 1
    if pos >= len(lines):
        raise MeshFormatError(f"missing section {name}", pos + 1)
    parts = lines[pos].split()
    if len(parts) != 2 or parts[0] != name:
        raise MeshFormatError(f"expected '{name} <count>'", pos + 1)
    try:
        count = int(parts[1])
    except ValueError:
        raise MeshFormatError(f"bad count for {name}", pos + 1) from None
    if pos + 1 + count > len(lines):
        raise MeshFormatError(f"truncated {name} section", len(lines) + 1)
    return count, pos + 1


def read_mesh(path) -> TetMeshP2:
    with open(path) as fh:
        lines = fh.read().splitlines()
    level = 0
    for line in lines[:1]:
        if line.startswith("# dodecawave mesh level"):
            level = int(line.split()[-1])

    count, pos = _section(lines, 0, "VERTICES")
    vertices = np.empty((count, 3))
    for k in range(count):
        parts = lines[pos + k].split()
        if len(parts) != 4 or parts[0] != str(k):
            raise MeshFormatError("expected 'id x y z'", pos + k + 1)
        try:
            vertices[k] = [float(v) for v in parts[1:]]
        except ValueError:
            raise MeshFormatError("bad coordinate", pos + k + 1) from None
    pos += count

    count, pos = _section(lines, pos, "TETS")
    tets = np.empty((count, 4), dtype=np.int64)
    for k in range(count):
        parts = lines[pos + k].split()
        if len(parts) != 5 or parts[0] != str(k):
            raise MeshFormatError("expected 'id v0 v1 v2 v3'", pos + k + 1)
        try:
            tets[k] = [int(v) for v in parts[1:]]
        except ValueError:
            raise MeshFormatError("bad vertex id", pos + k + 1) from None
        if tets[k].min() < 0 or tets[k].max() >= len(vertices):
            raise MeshFormatError("vertex id out of range", pos + k + 1)
    pos += count

    mesh = TetMeshP2(vertices, tets, level)
    count, pos = _section(lines, pos, "CLASSES")
    node_class = np.full(mesh.n_nodes, -1, dtype=np.int64)
    class_kind = np.empty(count, dtype=np.int64)
    for c in range(count):
        parts = lines[pos + c].split()
        if len(parts) < 3 or parts[0] != str(c):
            raise MeshFormatError("expected 'class_id kind node_id...'", pos + c + 1)
        try:
            class_kind[c] = int(parts[1])
            members = [int(v) for v in parts[2:]]
        except ValueError:
            raise MeshFormatError("bad class record", pos + c + 1) from None
        if min(members) < 0 or max(members) >= mesh.n_nodes:
            raise MeshFormatError("node id out of range", pos + c + 1)
        node_class[members] = c
    if np.any(node_class < 0):
        raise MeshFormatError("some nodes belong to no class")
    mesh.node_class = node_class
    mesh.class_kind = class_kind
    return mesh
