"""31-point degree-7 quadrature on the reference tetrahedron (Keast rule)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# (barycentric generator, weight) for each orbit; weights sum to 1/6
_ORBITS = [
    ((0.25, 0.25, 0.25, 0.25), 0.0182642234661088),
    ((0.7653604230090441, 0.0782131923303186, 0.0782131923303186, 0.0782131923303186), 0.0105999415244141),
    ((0.6344703500082868, 0.1218432166639044, 0.1218432166639044, 0.1218432166639044), -0.0625177401143299),
    ((0.0023825066607383, 0.3325391644464206, 0.3325391644464206, 0.3325391644464206), 0.0048914252630735),
    ((0.0, 0.0, 0.5, 0.5), 0.0009700176366843),
    ((0.2, 0.1, 0.6, 0.1), 0.0275573192239851),
]


@dataclass(frozen=True)
class QuadratureRule:
    barycentric: np.ndarray  # (n, 4)
    weights: np.ndarray  # (n,)

    @property
    def points(self) -> np.ndarray:
        """Reference coordinates ``(xi, eta, zeta)`` of the nodes."""
        return self.barycentric[:, 1:]

    def __len__(self):
        return len(self.weights)

    def integrate(self, f) -> float:
        """Integrate ``f(xi, eta, zeta)`` over the reference tetrahedron."""
        p = self.points
        return float(np.dot(self.weights, f(p[:, 0], p[:, 1], p[:, 2])))

    def table(self) -> str:
        rows = [
            " ".join(f"{v:.17g}" for v in (*b, w))
            for b, w in zip(self.barycentric, self.weights)
        ]
        return "\n".join(rows)


@lru_cache(maxsize=None)
def quadrature_31() -> QuadratureRule:
    bary, weights = [], []
    for gen, w in _ORBITS:
        for perm in sorted(set(itertools.permutations(gen))):
            bary.append(perm)
            weights.append(w)
    bary = np.array(bary)
    weights = np.array(weights)
    bary.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(bary, weights)
