"""Scale factors of the Robertson-Walker metric."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

DESITTER = "desitter"
INFLATING = "inflating"
CUSTOM = "custom"


@dataclass(frozen=True)
class ScaleFactorModel:
    """``a(t) = cosh(H t)/H`` (de Sitter), ``a(t) = e^t`` (inflating) or custom.

    Custom models take callables ``a(t)`` and ``adot(t)``.
    """

    kind: str
    H: float = 1.0
    a_func: Callable | None = None
    adot_func: Callable | None = None

    def __post_init__(self):
        if self.kind not in (DESITTER, INFLATING, CUSTOM):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == DESITTER and not self.H > 0:
            raise ValueError("H must be positive")
        if self.kind == CUSTOM and (self.a_func is None or self.adot_func is None):
            raise ValueError("custom model needs a(t) and a'(t)")

    @property
    def code(self) -> int:
        """Integer tag used by the compiled kernels (-1 for custom)."""
        return {DESITTER: 0, INFLATING: 1}.get(self.kind, -1)

    def a(self, t):
        if self.kind == DESITTER:
            return np.cosh(self.H * np.asarray(t)) / self.H
        if self.kind == INFLATING:
            return np.exp(np.asarray(t, dtype=float))
        val = np.asarray(self.a_func(t), dtype=float)
        if np.any(val <= 0):
            raise ValueError("scale factor must be positive")
        return val

    def hubble(self, t):
        """``a'(t) / a(t)``."""
        if self.kind == DESITTER:
            return self.H * np.tanh(self.H * np.asarray(t))
        if self.kind == INFLATING:
            return np.ones_like(np.asarray(t, dtype=float))
        return np.asarray(self.adot_func(t), dtype=float) / self.a(t)

    def conformal_time(self, t0: float, t1: float) -> float:
        """``int_{t0}^{t1} ds / a(s)`` (``t1`` may be ``inf``)."""
        if self.kind == DESITTER:
            H = self.H
            end = math.pi if math.isinf(t1) else 2.0 * math.atan(math.exp(H * t1))
            return end - 2.0 * math.atan(math.exp(H * t0))
        if self.kind == INFLATING:
            end = 0.0 if math.isinf(t1) else math.exp(-t1)
            return math.exp(-t0) - end
        val, _ = quad(lambda s: 1.0 / float(self.a(s)), t0, t1, limit=200)
        return val

    def norm_weight(self, t) -> float:
        """Factor multiplying ``d_t u`` in the asymptotic diagnostic."""
        if self.kind == DESITTER:
            # (1 - tanh x)^-1 = (1 + e^{2x}) / 2
            return (1.0 + math.exp(2.0 * self.H * t)) / (4.0 * self.H)
        if self.kind == INFLATING:
            return math.exp(2.0 * t)
        raise ValueError("no asymptotic diagnostic for custom models")


def de_sitter(H: float = 1.0) -> ScaleFactorModel:
    return ScaleFactorModel(DESITTER, H=float(H))


def inflating() -> ScaleFactorModel:
    return ScaleFactorModel(INFLATING)


def custom(a, adot) -> ScaleFactorModel:
    return ScaleFactorModel(CUSTOM, a_func=a, adot_func=adot)


def from_name(name: str, H: float = 1.0) -> ScaleFactorModel:
    key = name.strip().lower().replace("-", "").replace("_", "")
    if key in ("desitter", "ds"):
        return de_sitter(H)
    if key in ("inflating", "exp", "exponential"):
        return inflating()
    raise ValueError(f"unknown model {name!r} (expected desitter or inflating)")


def scale_factor(model: ScaleFactorModel, t):
    """Return ``(a(t), a'(t)/a(t))``."""
    return model.a(t), model.hubble(t)
