"""Causal radii: comoving light cones, future horizons and the circles test."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy.integrate import IntegrationWarning, quad

from .group import D_MAX, R_MAX
from .models import ScaleFactorModel


class HorizonError(ValueError):
    pass


@dataclass(frozen=True)
class HorizonSpec:
    model: ScaleFactorModel
    t_star: float
    R: float

    def __post_init__(self):
        if not 0.0 <= self.R < R_MAX:
            raise ValueError(f"support radius must lie in [0, {R_MAX:.6f})")


@dataclass(frozen=True)
class RadiusResult:
    """``radius = sin(angle)``; ``wrapped`` is set once ``angle`` passes pi/2."""

    radius: float
    angle: float
    wrapped: bool

    def __float__(self):
        return self.radius


def _radius(R: float, eta: float) -> RadiusResult:
    angle = math.asin(R) + eta
    return RadiusResult(math.sin(angle), angle, angle > math.pi / 2)


def comoving_radius(model: ScaleFactorModel, t_star: float, R: float, t: float) -> RadiusResult:
    """Radius at time ``t`` of the causal future of a ball of radius ``R`` at ``t_star``."""
    if not 0.0 <= R <= 1.0:
        raise ValueError("R must lie in [0, 1]")
    if t < t_star:
        raise ValueError("t must not precede t_star")
    return _radius(R, model.conformal_time(t_star, t))


def _tail(model: ScaleFactorModel, t_star: float) -> float:
    if model.kind != "custom":
        return model.conformal_time(t_star, math.inf)

    def inv_a(s):
        try:
            return 1.0 / float(model.a(s))
        except OverflowError:
            return 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, _ = quad(inv_a, t_star, math.inf, limit=400)
        except IntegrationWarning:
            raise HorizonError("no future horizon: conformal time diverges") from None
    if not math.isfinite(val):
        raise HorizonError("no future horizon: conformal time diverges")
    return val


def horizon_radius(spec: HorizonSpec) -> RadiusResult:
    """Limit of :func:`comoving_radius` as ``t`` goes to infinity."""
    return _radius(spec.R, _tail(spec.model, spec.t_star))


@dataclass(frozen=True)
class CirclesResult:
    radius: float
    distance: float
    multiple_images: bool


def circles_condition(t_ls: float, t_obs: float, model: ScaleFactorModel) -> CirclesResult:
    """Radius of the last-scattering sphere seen at ``t_obs``.

    The sphere meets its own images once its conformal radius exceeds the
    domain's outer radius ``D_MAX``.
    """
    if not t_obs > t_ls:
        raise ValueError("t_obs must exceed t_ls")
    eta = model.conformal_time(t_ls, t_obs)
    return CirclesResult(math.sin(eta), eta, eta > D_MAX)
