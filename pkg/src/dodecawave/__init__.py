"""Finite-element waves on the Poincare dodecahedral space.

Modules: ``group`` (binary icosahedral group, fundamental domain), ``mesh``
(P2 tetrahedral meshes with glued faces), ``fem`` (assembly, evaluation),
``evolution`` (time stepping), ``spectral`` (closed-form mode solutions),
``horizon`` and ``sky`` (causal radii, sky maps, tilings) and ``cli``.
"""

from ._jit import JIT_ENABLED, NUMBA_AVAILABLE

__version__ = "0.1.0"

__all__ = ["JIT_ENABLED", "NUMBA_AVAILABLE", "__version__"]
