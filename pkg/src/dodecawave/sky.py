"""Sachs-Wolfe sky maps and tilings of the universal cover."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fem import Locator, nodal_values
from .group import (
    INJECTIVITY_RADIUS,
    clifford_translations,
    group_quaternions,
    index_of,
    lift,
    multiplication_table,
    project,
    quat_conj,
    quat_mul,
    reduce_many,
)
from .mesh import TetMeshP2

#: Pixels evaluated per batch; bounds the memory of point location.
CHUNK = 65536


def sphere_points(chi: float, theta, phi) -> np.ndarray:
    """Points of S^3 at distance ``chi`` from the identity, in spherical angles."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    s = math.sin(chi)
    return np.stack(
        [
            np.full(theta.shape, math.cos(chi)),
            s * np.sin(theta) * np.sin(phi),
            s * np.sin(theta) * np.cos(phi),
            s * np.cos(theta),
        ],
        axis=-1,
    )


def sphere_angles(x) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`sphere_points` for the direction part of ``x``."""
    v = np.asarray(x, dtype=float)[..., 1:]
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    theta = np.arccos(np.clip(v[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(v[..., 0], v[..., 1]), 2 * np.pi)
    return theta, phi


@dataclass
class SkyMap:
    """Temperature contrast on an equirectangular grid of pixel centres.

    ``values[i, j]`` belongs to ``theta[i] = (i + 1/2) pi / n_theta`` and
    ``phi[j] = 2 pi j / n_phi``.
    """

    chi: float
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.chi < math.pi:
            raise ValueError("chi must lie in (0, pi)")
        if self.values.shape != (len(self.theta), len(self.phi)) or self.values.size == 0:
            raise ValueError("grid dimensions must be positive and match the values")

    @property
    def dynamic_range(self) -> float:
        return float(self.values.max() - self.values.min())

    def sample(self, theta, phi) -> np.ndarray:
        """Bilinear interpolation, periodic in ``phi`` and clamped in ``theta``."""
        nt, nph = self.values.shape
        u = np.clip(np.asarray(theta) / math.pi * nt - 0.5, 0.0, nt - 1.0)
        w = np.mod(np.asarray(phi), 2 * math.pi) / (2 * math.pi) * nph
        i0 = np.minimum(np.floor(u).astype(int), nt - 2) if nt > 1 else np.zeros_like(u, int)
        j0 = np.floor(w).astype(int) % nph
        fu = u - i0 if nt > 1 else np.zeros_like(u)
        fw = w - np.floor(w)
        i1 = np.minimum(i0 + 1, nt - 1)
        j1 = (j0 + 1) % nph
        v = self.values
        return ((1 - fu) * (1 - fw) * v[i0, j0] + (1 - fu) * fw * v[i0, j1]
                + fu * (1 - fw) * v[i1, j0] + fu * fw * v[i1, j1])


def field_on_sphere(mesh: TetMeshP2, U, x, locator: Locator | None = None) -> np.ndarray:
    """Value of the quotient field at S^3 points, via their images in the domain."""
    locator = locator or Locator(mesh)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty(len(x))
    for start in range(0, len(x), CHUNK):
        sl = slice(start, start + CHUNK)
        reduced, _ = reduce_many(x[sl])
        out[sl] = locator.evaluate(U, project(reduced))
    return out


def sky_map(mesh: TetMeshP2, U, chi: float, n_theta: int = 512, n_phi: int = 1024,
            locator: Locator | None = None) -> SkyMap:
    """``dT/T = U / 3`` on the sphere of radius ``chi`` around the observer."""
    if not 0.0 < chi < math.pi:
        raise ValueError("chi must lie in (0, pi)")
    if n_theta < 1 or n_phi < 1:
        raise ValueError("grid dimensions must be positive")
    theta = (np.arange(n_theta) + 0.5) * math.pi / n_theta
    phi = np.arange(n_phi) * 2 * math.pi / n_phi
    pts = sphere_points(chi, theta[:, None], phi[None, :]).reshape(-1, 4)
    vals = field_on_sphere(mesh, U, pts, locator) / 3.0
    return SkyMap(float(chi), theta, phi, vals.reshape(n_theta, n_phi))


def circle_pairs(chi: float, n_samples: int = 360) -> list[tuple[np.ndarray, np.ndarray]]:
    """The six pairs of matched circles on the sphere of radius ``chi``.

    Circle ``k`` is where the sphere meets its image under ``g_k``; its
    points ``x`` are matched with ``g_k^{-1} x`` on the opposite circle.
    Empty when ``chi`` does not exceed the injectivity radius.
    """
    if chi <= INJECTIVITY_RADIUS:
        return []
    pairs = []
    s = np.linspace(0.0, 2 * math.pi, n_samples, endpoint=False)
    for g in clifford_translations()[:6]:
        axis = g.q[1:] / np.linalg.norm(g.q[1:])
        angle = math.atan2(np.linalg.norm(g.q[1:]), g.q[0])
        # direction cosine with the axis for points equidistant from 1 and g
        c = math.tan(angle / 2) / math.tan(chi)
        ring = math.sqrt(max(0.0, 1.0 - c * c))
        e1 = np.cross(axis, [1.0, 0.0, 0.0] if abs(axis[0]) < 0.9 else [0.0, 1.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(axis, e1)
        dirs = c * axis + ring * (np.cos(s)[:, None] * e1 + np.sin(s)[:, None] * e2)
        x = np.concatenate([np.full((n_samples, 1), math.cos(chi)), math.sin(chi) * dirs], axis=1)
        pairs.append((x, quat_mul(quat_conj(g.q)[None, :], x)))
    return pairs


@dataclass(frozen=True)
class CircleReport:
    residual: float
    dynamic_range: float
    n_pairs: int

    @property
    def ratio(self) -> float:
        return self.residual / self.dynamic_range if self.dynamic_range > 0 else 0.0


def circle_residual(sky: SkyMap, n_samples: int = 360) -> CircleReport:
    """Mean absolute difference of the map between matched circle points."""
    diffs = []
    pairs = circle_pairs(sky.chi, n_samples)
    for a, b in pairs:
        va = sky.sample(*sphere_angles(a))
        vb = sky.sample(*sphere_angles(b))
        diffs.append(np.abs(va - vb))
    res = float(np.mean(np.concatenate(diffs))) if diffs else 0.0
    return CircleReport(res, sky.dynamic_range, len(pairs))


def _sky_stem(chi: float) -> str:
    return f"sky_chi{chi:.6f}"


def write_sky(sky: SkyMap, out_dir) -> tuple[Path, Path]:
    """Write ``theta phi value`` rows and a 16-bit min-max scaled graymap."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = _sky_stem(sky.chi)
    tsv = out / f"{stem}.tsv"
    th, ph = np.meshgrid(sky.theta, sky.phi, indexing="ij")
    with open(tsv, "w") as fh:
        fh.write(f"# chi={sky.chi:.17g} n_theta={len(sky.theta)} n_phi={len(sky.phi)}\n")
        fh.write("# theta\tphi\tvalue\n")
        for t, p, v in zip(th.ravel(), ph.ravel(), sky.values.ravel()):
            fh.write(f"{t:.17g}\t{p:.17g}\t{v:.17g}\n")
    lo, hi = float(sky.values.min()), float(sky.values.max())
    span = hi - lo
    # spans at rounding level are flat maps, not structure worth stretching
    flat = span <= 64 * np.finfo(float).eps * max(abs(lo), abs(hi))
    scaled = np.zeros(sky.values.shape) if flat else (sky.values - lo) / span
    pix = np.round(scaled * 65535).astype(">u2")
    pgm = out / f"{stem}.pgm"
    with open(pgm, "wb") as fh:
        head = f"P5\n# min={lo:.17g} max={hi:.17g}\n{pix.shape[1]} {pix.shape[0]}\n65535\n"
        fh.write(head.encode("ascii"))
        fh.write(pix.tobytes())
    return tsv, pgm


def read_pgm(path):
    """Return ``(pixels, min, max)`` from a graymap written by :func:`write_sky`."""
    data = Path(path).read_bytes()
    fields, pos, lo, hi = [], 0, None, None
    while len(fields) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            for item in line[1:].split():
                key, val = item.split("=")
                if key == "min":
                    lo = float(val)
                elif key == "max":
                    hi = float(val)
            continue
        fields.extend(line.split())
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if fields[0] != "P5" or maxval != 65535:
        raise ValueError("not a 16-bit binary graymap")
    pix = np.frombuffer(data[pos:pos + 2 * w * h], dtype=">u2").reshape(h, w)
    return pix, lo, hi


def parse_elements(spec: str) -> list[int]:
    """Group indices from a comma list such as ``id,g1,g2*g6,17``.

    ``gK`` names the K-th Clifford translation and ``*`` composes (the
    right factor acts first); bare integers are group indices.
    """
    tags = {g.tag: g.index for g in clifford_translations()}
    table = multiplication_table()
    out = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        idx = None
        for factor in token.split("*"):
            factor = factor.strip()
            if factor == "id":
                k = index_of(np.array([1.0, 0.0, 0.0, 0.0]))
            elif factor in tags:
                k = tags[factor]
            elif factor.isdigit() and int(factor) < len(group_quaternions()):
                k = int(factor)
            else:
                raise ValueError(f"unknown group element {factor!r}")
            idx = k if idx is None else int(table[idx, k])
        out.append(idx)
    if not out:
        raise ValueError("empty element list")
    return out


def neighbour_cells() -> list[int]:
    """The identity followed by g_1..g_12: the domain and its face neighbours."""
    return parse_elements("id," + ",".join(g.tag for g in clifford_translations()))


def tiling_cells(mesh: TetMeshP2, U, elements):
    """Yield ``(index, points (n, 4), values (n,))`` for each image cell."""
    base = lift(mesh.vertices)
    vals = nodal_values(mesh, U)[: mesh.n_vertices]
    quats = group_quaternions()
    for k in elements:
        yield int(k), quat_mul(quats[k][None, :], base), vals


def tiling_export(mesh: TetMeshP2, U, elements, path) -> None:
    """Write ``cell k`` blocks of ``vertex x y z value`` records.

    Coordinates are the projection dropping ``x0`` of the image cell.
    """
    with open(path, "w") as fh:
        fh.write(f"# tiling level={mesh.level} cells={len(list(elements))} vertices={mesh.n_vertices}\n")
        for k, pts, vals in tiling_cells(mesh, U, elements):
            fh.write(f"cell {k}\n")
            for p, v in zip(pts, vals):
                fh.write(f"vertex {p[1]:.17g} {p[2]:.17g} {p[3]:.17g} {v:.17g}\n")


def read_tiling(path) -> dict[int, np.ndarray]:
    """Map cell index to an ``(n, 4)`` array of ``x y z value`` rows."""
    cells, cur = {}, None
    for line in Path(path).read_text().splitlines():
        if line.startswith("cell "):
            cur = int(line.split()[1])
            cells[cur] = []
        elif line.startswith("vertex "):
            cells[cur].append([float(v) for v in line.split()[1:]])
    return {k: np.array(v) for k, v in cells.items()}
