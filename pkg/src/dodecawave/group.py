"""Binary icosahedral group and the dodecahedral fundamental domain.

Quaternions are stored as float arrays ``(w, x, y, z)`` and identified with
points ``(x0, x1, x2, x3)`` of R^4.  The group acts on S^3 by left
multiplication.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SIGMA = (1.0 + np.sqrt(5.0)) / 2.0
BOUNDARY_TOL = 1e-10

#: Largest geodesic distance from the center of the domain to its boundary.
D_MAX = float(np.arccos(SIGMA**2 / (2.0 * np.sqrt(2.0))))
#: Largest Euclidean radius of the projected domain.
R_MAX = float(np.sqrt(1.0 - SIGMA**4 / 8.0))
#: Half the distance between the center and its nearest translate.
INJECTIVITY_RADIUS = float(np.pi / 10.0)


def quat_mul(a, b):
    """Hamilton product ``a * b``, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(a):
    a = np.asarray(a, dtype=float)
    return a * np.array([1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True)
class GroupElement:
    q: np.ndarray
    index: int
    tag: str | None = None

    def __mul__(self, other):
        return quat_mul(self.q, other)


def _even_permutations(n):
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        if inversions % 2 == 0:
            yield perm


def _generate_elements():
    elems = []
    for axis in range(4):
        for sign in (1.0, -1.0):
            v = np.zeros(4)
            v[axis] = sign
            elems.append(v)
    for signs in itertools.product((0.5, -0.5), repeat=4):
        elems.append(np.array(signs))
    base = (0.0, 1.0, 1.0 / SIGMA, SIGMA)
    for perm in _even_permutations(4):
        for s1, s2, s3 in itertools.product((1.0, -1.0), repeat=3):
            vals = (0.0, s1 * base[1], s2 * base[2], s3 * base[3])
            v = np.empty(4)
            for src, dst in enumerate(perm):
                v[dst] = 0.5 * vals[src]
            elems.append(v)
    return np.array(elems)


@lru_cache(maxsize=None)
def _group_arrays():
    raw = _generate_elements()
    # identity first, then by decreasing w and lexicographic (x, y, z)
    keys = np.round(raw, 12)
    order = np.lexsort((keys[:, 3], keys[:, 2], keys[:, 1], -keys[:, 0]))
    elems = raw[order]
    elems.setflags(write=False)
    n = len(elems)
    # multiplication table by nearest-element lookup
    prods = quat_mul(elems[:, None, :], elems[None, :, :]).reshape(-1, 4)
    dots = prods @ elems.T
    table = np.argmax(dots, axis=1).reshape(n, n)
    inverse = np.argmax(elems @ quat_conj(elems).T, axis=0)
    table.setflags(write=False)
    inverse.setflags(write=False)
    return elems, table, inverse


def group_quaternions() -> np.ndarray:
    """The 120 elements as a read-only ``(120, 4)`` array (identity first)."""
    return _group_arrays()[0]


def multiplication_table() -> np.ndarray:
    """``table[i, j]`` is the index of ``g_i * g_j``."""
    return _group_arrays()[1]


def inverse_indices() -> np.ndarray:
    return _group_arrays()[2]


def index_of(q, tol=1e-9) -> int:
    """Index of the group element equal to ``q``; raises if absent."""
    elems = group_quaternions()
    d = np.abs(elems - np.asarray(q, dtype=float)).max(axis=1)
    k = int(np.argmin(d))
    if d[k] > tol:
        raise ValueError("quaternion is not an element of the group")
    return k


def _translation_quaternions():
    s, r = SIGMA, 1.0 / SIGMA
    first = np.array(
        [
            [s, r, 1.0, 0.0],
            [s, 1.0, 0.0, -r],
            [s, 0.0, r, -1.0],
            [s, -r, 1.0, 0.0],
            [s, 0.0, r, 1.0],
            [s, 1.0, 0.0, r],
        ]
    ) / 2.0
    return np.vstack([first, quat_conj(first)])


@lru_cache(maxsize=None)
def _translations():
    tags = {}
    out = []
    for i, q in enumerate(_translation_quaternions(), start=1):
        k = index_of(q)
        tags[k] = f"g{i}"
        out.append(GroupElement(group_quaternions()[k], k, f"g{i}"))
    return tuple(out), tags


def enumerate_group() -> list[GroupElement]:
    """All 120 elements of the binary icosahedral group."""
    tags = _translations()[1]
    return [GroupElement(q, k, tags.get(k)) for k, q in enumerate(group_quaternions())]


def clifford_translations() -> list[GroupElement]:
    """The twelve face-gluing translations ``g1 .. g12`` (``g(i+6) = g(i)^-1``)."""
    return list(_translations()[0])


def translation_quaternions() -> np.ndarray:
    """``(12, 4)`` array of ``g1 .. g12``."""
    return np.array([g.q for g in clifford_translations()])


# Domain vertices: (sigma^2, a, b, c) / (2 sqrt 2)
_A = 1.0 / SIGMA
_B = 1.0 / SIGMA**2
_VERTEX_TAILS = [
    (-_A, _A, -_A),
    (1.0, _B, 0.0),
    (-_A, -_A, _A),
    (_A, -_A, -_A),
    (0.0, -1.0, -_B),
    (_A, _A, _A),
    (-_B, 0.0, 1.0),
    (0.0, 1.0, _B),
    (-_A, _A, _A),
    (_B, 0.0, 1.0),
    (0.0, 1.0, -_B),
    (-1.0, _B, 0.0),
    (-_B, 0.0, -1.0),
    (_A, -_A, _A),
    (_B, 0.0, -1.0),
    (-_A, -_A, -_A),
    (_A, _A, -_A),
    (-1.0, -_B, 0.0),
    (1.0, -_B, 0.0),
    (0.0, -1.0, _B),
]

# Vertex cycles of faces F1..F6 (1-based vertex labels); F(i+6) = g_i(F_i).
_FACE_CYCLES_LOW = [
    (3, 18, 16, 5, 20),
    (18, 12, 9, 7, 3),
    (3, 7, 10, 14, 20),
    (20, 14, 19, 4, 5),
    (5, 4, 15, 13, 16),
    (16, 13, 1, 12, 18),
]


def domain_vertices() -> np.ndarray:
    """``(20, 4)`` array of the vertices ``S1 .. S20``."""
    tails = np.array(_VERTEX_TAILS)
    head = np.full((20, 1), SIGMA**2)
    return np.hstack([head, tails]) / (2.0 * np.sqrt(2.0))


def vertex_label(x, tol=1e-9) -> int:
    """1-based label of the domain vertex equal to ``x``."""
    d = np.abs(domain_vertices() - np.asarray(x)).max(axis=1)
    k = int(np.argmin(d))
    if d[k] > tol:
        raise ValueError("point is not a domain vertex")
    return k + 1


@dataclass(frozen=True)
class FundamentalDomain:
    vertices: np.ndarray
    faces: tuple
    normals: np.ndarray
    translations: np.ndarray

    @staticmethod
    def partner(face: int) -> int:
        """0-based index of the face glued to ``face``."""
        return (face + 6) % 12


@lru_cache(maxsize=None)
def fundamental_domain() -> FundamentalDomain:
    verts = domain_vertices()
    gs = translation_quaternions()
    faces = [tuple(c) for c in _FACE_CYCLES_LOW]
    for i, cycle in enumerate(_FACE_CYCLES_LOW):
        images = quat_mul(gs[i], verts[np.array(cycle) - 1])
        faces.append(tuple(vertex_label(p) for p in images))
    normals = []
    center = np.array([1.0, 0.0, 0.0, 0.0])
    for cycle in faces:
        pts = verts[np.array(cycle) - 1]
        n = np.linalg.svd(pts)[2][-1]
        if n @ center < 0:
            n = -n
        normals.append(n / np.linalg.norm(n))
    normals = np.array(normals)
    normals.setflags(write=False)
    return FundamentalDomain(verts, tuple(faces), normals, gs)


def face_normals() -> np.ndarray:
    """Unit inward normals of the 12 hyperplanes (through 0) bounding F."""
    return fundamental_domain().normals


def _check_unit(x, tol=1e-9):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > tol):
        raise ValueError("expected unit quaternion(s)")
    return x


def geodesic_distance(x, y) -> float | np.ndarray:
    """Great-circle distance on S^3."""
    x = _check_unit(x)
    y = _check_unit(y)
    return np.arccos(np.clip(np.sum(x * y, axis=-1), -1.0, 1.0))


def lift(X):
    """Map a point of the projected domain to S^3 (``x0 >= 0``)."""
    X = np.asarray(X, dtype=float)
    r2 = np.sum(X * X, axis=-1)
    if np.any(r2 > 1.0 + 1e-14):
        raise ValueError("lift requires |X| <= 1")
    x0 = np.sqrt(np.clip(1.0 - r2, 0.0, None))
    return np.concatenate([x0[..., None], X], axis=-1)


def project(x):
    """Drop the ``x0`` coordinate of an S^3 point with ``x0 > 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x[..., 0] <= 0.0):
        raise ValueError("project requires x0 > 0")
    return x[..., 1:].copy()


@dataclass(frozen=True)
class Location:
    """Result of a membership test; ``faces`` are 0-based face indices."""

    kind: str
    faces: tuple = ()

    @property
    def class_size(self) -> int:
        return {"interior": 1, "face": 2, "edge": 3, "vertex": 4}[self.kind]


def face_distances(x):
    """Signed values of the 12 half-space tests (``>= 0`` inside F)."""
    return np.asarray(x, dtype=float) @ face_normals().T


def contains(x, tol: float = BOUNDARY_TOL) -> Location:
    """Classify an S^3 point against the closed fundamental domain."""
    s = face_distances(_check_unit(x))
    if np.any(s < -tol):
        return Location("outside")
    active = tuple(int(k) for k in np.flatnonzero(s <= tol))
    kinds = {0: "interior", 1: "face", 2: "edge", 3: "vertex"}
    if len(active) > 3:
        raise RuntimeError("point lies on more than three faces")
    return Location(kinds[len(active)], active)


def reduce_many(x, tol: float = BOUNDARY_TOL):
    """Vectorized :func:`reduce_to_domain`.

    Returns the reduced points ``(n, 4)`` and the indices ``(n,)`` of the
    group elements ``tau`` with ``tau * x`` in F.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    elems = group_quaternions()
    inv = inverse_indices()
    dots = x @ elems.T
    best = dots.max(axis=1, keepdims=True)
    # tau * x in F  <=>  tau^-1 is (one of) the nearest group elements to x
    key = np.where(dots >= best - tol, inv[None, :], elems.shape[0])
    tau = key.min(axis=1)
    reduced = quat_mul(elems[tau], x)
    return reduced, tau


def reduce_to_domain(x, tol: float = BOUNDARY_TOL):
    """Bring an S^3 point into F.

    Returns ``(x_reduced, tau)`` where ``tau`` is the :class:`GroupElement`
    with ``tau * x = x_reduced``; boundary ties go to the smallest index.
    """
    x = _check_unit(x)
    reduced, tau = reduce_many(x[None, :], tol)
    k = int(tau[0])
    tag = _translations()[1].get(k)
    return reduced[0], GroupElement(group_quaternions()[k], k, tag)


def orbit_in_domain(x, tol: float = 1e-8) -> np.ndarray:
    """All images ``g * x`` (g in the group) lying in the closed domain."""
    images = quat_mul(group_quaternions(), np.asarray(x, dtype=float)[None, :])
    keep = np.all(face_distances(images) >= -tol, axis=1)
    pts = images[keep]
    out = []
    for p in pts:
        if not any(np.abs(p - q).max() < tol for q in out):
            out.append(p)
    return np.array(out)


def boundary_partner(X, tol: float = 1e-8) -> np.ndarray:
    """Projected points equivalent to the boundary point ``X`` (itself included).

    The class of a face point has 2 members, of an edge point 3 and of a
    vertex 4.
    """
    x = lift(X)
    loc = contains(x, tol)
    if loc.kind == "outside":
        raise ValueError("point lies outside the domain")
    if loc.kind == "interior":
        raise ValueError("not a boundary point")
    return project(orbit_in_domain(x, tol))


def group_table_lines() -> list[str]:
    """Lines ``index w x y z`` at 17 significant digits."""
    return [
        f"{k} " + " ".join(f"{v:.17g}" for v in q)
        for k, q in enumerate(group_quaternions())
    ]


def export_geometry(path) -> None:
    """Write the group table, domain vertices and face cycles to ``path``."""
    dom = fundamental_domain()
    lines = [f"GROUP {len(group_quaternions())}"]
    lines += group_table_lines()
    lines.append(f"TRANSLATIONS {len(dom.translations)}")
    for g in clifford_translations():
        lines.append(f"{g.tag} {g.index}")
    lines.append(f"VERTICES {len(dom.vertices)}")
    for k, v in enumerate(dom.vertices, start=1):
        lines.append(f"{k} " + " ".join(f"{c:.17g}" for c in v))
    lines.append(f"FACES {len(dom.faces)}")
    for k, cycle in enumerate(dom.faces, start=1):
        lines.append(f"{k} " + " ".join(str(v) for v in cycle))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
