"""Mode-by-mode solutions of the wave equation on the dodecahedral space.

Each Laplace eigenvalue ``-q^2`` with ``q^2 = beta^2 - 1`` contributes a mode
``u_q(t)`` solving::

    u'' + 3 (a'/a) u' + (q^2 / a^2) u = 0

For the de Sitter scale factor the solutions are Ferrers functions of
``tanh(H t)``; for the inflating one they are Bessel functions of
``q e^{-t}``.  Both are evaluated through their trigonometric closed forms
in the angle ``theta = 2 arctan(e^{-H t})`` (so ``cos(theta) = tanh(H t)``)
or in ``z = q e^{-t}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import poch, rgamma

from ._jit import JIT_ENABLED, njit
from .models import DESITTER, INFLATING, ScaleFactorModel

SQRT_2_PI = math.sqrt(2.0 / math.pi)
SQRT_PI_2 = math.sqrt(math.pi / 2.0)
#: Constant unit-norm eigenfunction on a space of volume pi^2/60.
PSI0 = 2.0 * math.sqrt(15.0) / math.pi

_LOW_BETAS = (1, 13, 21, 25, 31, 33, 37, 41, 43, 45, 49, 51, 53, 55, 57)
_SERIES_CAP = 200


@dataclass(frozen=True)
class EigenLabel:
    beta: int

    @property
    def q2(self) -> int:
        return self.beta * self.beta - 1

    @property
    def q(self) -> float:
        return math.sqrt(self.q2)

    @property
    def sign(self) -> int:
        """``sin(beta pi / 2)``, which is +1 or -1 for odd beta."""
        return 1 if (self.beta - 1) // 2 % 2 == 0 else -1


def is_admissible(beta: int) -> bool:
    return beta in _LOW_BETAS or (beta >= 61 and beta % 2 == 1)


def eigen_betas(beta_max: int) -> list[EigenLabel]:
    """Admissible labels with ``beta <= beta_max``, sorted."""
    out = [b for b in _LOW_BETAS if b <= beta_max]
    out += list(range(61, int(beta_max) + 1, 2))
    return [EigenLabel(b) for b in out]


def _betas(labels) -> np.ndarray:
    if isinstance(labels, EigenLabel):
        return np.array(float(labels.beta))
    if np.ndim(labels) == 0:
        return np.array(float(labels))
    arr = [lab.beta if isinstance(lab, EigenLabel) else lab for lab in np.atleast_1d(labels)]
    return np.asarray(arr, dtype=float)


# ---------------------------------------------------------------- Ferrers


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("Ferrers functions require |x| < 1")
    return x


def _hyp_sum(a, b, c, z):
    """``sum_s (a)_s (b)_s / (Gamma(c+s) s!) z^s`` (regularized 2F1)."""
    term = rgamma(c) * np.ones_like(z)
    total = term.copy()
    for s in range(_SERIES_CAP):
        term = term * (a + s) * (b + s) / ((c + s) * (s + 1.0)) * z
        if c + s == 0:  # pragma: no cover - only for non-positive integer c
            break
        total = total + term
        if np.all(np.abs(term) <= 1e-16 * np.abs(total)):
            break
    return total


def _p_series(mu, nu, x):
    z = 0.5 * (1.0 - x)
    return ((1.0 + x) / (1.0 - x)) ** (mu / 2.0) * _hyp_sum(-nu, nu + 1.0, 1.0 - mu, z)


def _q32_series(nu, x):
    z = 0.5 * (1.0 - x)
    pref = 0.5 * math.pi * poch(nu - 0.5, 3) * ((1.0 - x) / (1.0 + x)) ** 0.75
    return pref * _hyp_sum(nu + 1.0, -nu, 2.5, z)


def _integer_shift(nu, mu):
    n = nu + mu
    return abs(n - round(n)) < 1e-12, int(round(n))


def ferrers_P(mu: float, nu: float, x, method: str = "closed"):
    """Ferrers function of the first kind for ``mu = +-3/2``.

    ``method="closed"`` uses the trigonometric form (exact for every ``nu``
    when ``mu = 3/2``, and for ``nu = 1/2`` when ``mu = -3/2``);
    ``method="series"`` sums the hypergeometric series in ``(1 - x)/2``,
    which loses accuracy by cancellation when ``nu`` is large.
    """
    x = _check_x(x)
    if mu not in (1.5, -1.5):
        raise ValueError("only mu = 3/2 and mu = -3/2 are supported")
    if method == "closed":
        th = np.arccos(x)
        s = np.sin(th)
        if mu == 1.5:
            k = nu + 0.5
            return -np.sqrt(2.0 / (math.pi * s)) * (x / s * np.cos(k * th) + k * np.sin(k * th))
        if abs(nu - 0.5) > 1e-14:
            raise ValueError("closed form for mu = -3/2 is only available at nu = 1/2")
        return (th - s * x) / (math.sqrt(2.0 * math.pi) * s**1.5)
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    integral, n = _integer_shift(nu, mu)
    if mu == 1.5 and integral:
        # P(-x) = (-1)^(nu+mu) P(x)
        sign = np.where(x < 0, (-1.0) ** n, 1.0)
        return sign * _p_series(mu, nu, np.abs(x))
    return _p_series(mu, nu, x)


def ferrers_Q(mu: float, nu: float, x, method: str = "closed"):
    """Ferrers function of the second kind for ``mu = 3/2``."""
    x = _check_x(x)
    if mu != 1.5:
        raise ValueError("only mu = 3/2 is supported")
    if method == "closed":
        th = np.arccos(x)
        s = np.sin(th)
        k = nu + 0.5
        return np.sqrt(math.pi / (2.0 * s)) * (x / s * np.sin(k * th) - k * np.cos(k * th))
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    integral, n = _integer_shift(nu, mu)
    if integral:
        # Q(-x) = -(-1)^(nu+mu) Q(x)
        sign = np.where(x < 0, -((-1.0) ** n), 1.0)
        return sign * _q32_series(nu, np.abs(x))
    return _q32_series(nu, x)


def ferrers_P_derivative(mu: float, nu: float, x):
    """``d/dx`` of :func:`ferrers_P` (closed forms)."""
    x = _check_x(x)
    if mu == 1.5:
        # (1 - x^2) P' = (mu - nu - 1) P_{nu+1} + (nu + 1) x P_nu
        return ((mu - nu - 1.0) * ferrers_P(mu, nu + 1.0, x) + (nu + 1.0) * x * ferrers_P(mu, nu, x)) / (
            1.0 - x * x
        )
    if mu == -1.5 and abs(nu - 0.5) < 1e-14:
        th = np.arccos(x)
        s = np.sin(th)
        dth = (2.0 * s**3.5 - 1.5 * (th - s * x) * np.sqrt(s) * x) / (math.sqrt(2.0 * math.pi) * s**3)
        return -dth / s
    raise ValueError("derivative not available for these parameters")


def ferrers_Q_derivative(mu: float, nu: float, x):
    x = _check_x(x)
    if mu != 1.5:
        raise ValueError("only mu = 3/2 is supported")
    return ((mu - nu - 1.0) * ferrers_Q(mu, nu + 1.0, x) + (nu + 1.0) * x * ferrers_Q(mu, nu, x)) / (
        1.0 - x * x
    )


# ----------------------------------------------------------------- Bessel


def bessel_half(kind: str, order: float, x):
    """Bessel ``J`` or ``Y`` of order 1/2 or 3/2 from the trigonometric closed forms."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("bessel_half requires x > 0")
    pref = np.sqrt(2.0 / (math.pi * x))
    if kind == "J" and order == 0.5:
        return pref * np.sin(x)
    if kind == "Y" and order == 0.5:
        return -pref * np.cos(x)
    if kind == "J" and order == 1.5:
        x2 = x * x
        small = x2 * (1.0 / 3.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 840.0 - x2 / 45360.0)))
        big = np.sin(x) / np.where(x == 0, 1.0, x) - np.cos(x)
        return pref * np.where(x < 0.05, small, big)
    if kind == "Y" and order == 1.5:
        return pref * (-np.cos(x) / x - np.sin(x))
    raise ValueError("kind must be J or Y and order 1/2 or 3/2")


# -------------------------------------------------------------- mode basis


def _desitter_theta(H, t):
    return 2.0 * np.arctan(np.exp(-H * np.asarray(t, dtype=float)))


def mode_basis(model: ScaleFactorModel, labels, t):
    """Growing/decaying solution pair and derivatives.

    Returns ``(f_plus, df_plus, f_minus, df_minus)`` broadcast over ``labels``
    and ``t``; a mode is ``A+ f_plus + A- f_minus``.
    """
    beta = _betas(labels)
    t = np.asarray(t, dtype=float)
    beta, t = np.broadcast_arrays(beta, t)
    q2 = beta * beta - 1.0
    zero = q2 == 0
    if model.kind == DESITTER:
        H = model.H
        th = _desitter_theta(H, t)
        c, s = np.cos(th), np.sin(th)
        cb, sb = np.cos(beta * th), np.sin(beta * th)
        fp = np.where(zero, -SQRT_2_PI, -SQRT_2_PI * (c * cb + beta * s * sb))
        dfp = np.where(zero, 0.0, H * q2 * s * s * SQRT_2_PI * cb)
        fm = np.where(
            zero, (th - s * c) / math.sqrt(2.0 * math.pi), SQRT_PI_2 * (c * sb - beta * s * cb)
        )
        dfm = np.where(zero, -H * SQRT_2_PI * s**3, -H * q2 * s * s * SQRT_PI_2 * sb)
        return fp, dfp, fm, dfm
    if model.kind == INFLATING:
        q = np.sqrt(q2)
        e = np.exp(-t)
        z = np.where(zero, 1.0, q * e)
        g = e**1.5
        fp = np.where(zero, 1.0, g * bessel_half("Y", 1.5, z))
        dfp = np.where(zero, 0.0, -g * e * q * bessel_half("Y", 0.5, z))
        fm = np.where(zero, e**3, g * bessel_half("J", 1.5, z))
        dfm = np.where(zero, -3.0 * e**3, -g * e * q * bessel_half("J", 0.5, z))
        return fp, dfp, fm, dfm
    raise ValueError("closed-form modes exist only for the de Sitter and inflating models")


@dataclass(frozen=True)
class ModeCoefficients:
    a_plus: np.ndarray
    a_minus: np.ndarray
    model: str


@dataclass(frozen=True)
class ModeState:
    u: np.ndarray
    du: np.ndarray


def coeffs_from_data(model: ScaleFactorModel, labels, u0, u0prime, t0: float = 0.0) -> ModeCoefficients:
    """Coefficients ``(A+, A-)`` of the modes with data ``(u0, u0')`` at ``t0``.

    At ``t0 = 0`` the explicit formulas are used; otherwise the 2x2 system
    built from :func:`mode_basis` is solved.
    """
    beta = _betas(labels)
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u0prime, dtype=float)
    beta, u0, u1 = np.broadcast_arrays(beta, u0, u1)
    q2 = beta * beta - 1.0
    zero = q2 == 0
    safe_q2 = np.where(zero, 1.0, q2)
    if t0 == 0.0 and model.kind == DESITTER:
        H = model.H
        sign = np.where((beta - 1) // 2 % 2 == 0, 1.0, -1.0)
        ap = np.where(zero, -SQRT_PI_2 * (u0 + math.pi / (4.0 * H) * u1), -SQRT_PI_2 * sign / beta * u0)
        am = np.where(zero, -SQRT_PI_2 * u1 / H, -SQRT_2_PI * sign / (H * safe_q2) * u1)
        return ModeCoefficients(ap, am, model.kind)
    if t0 == 0.0 and model.kind == INFLATING:
        q = np.sqrt(safe_q2)
        sq, cq = np.sin(q), np.cos(q)
        ap = np.where(
            zero, u0 + u1 / 3.0, -SQRT_PI_2 * (np.sqrt(q) * sq * u0 + (sq - q * cq) / q**1.5 * u1)
        )
        am = np.where(
            zero, -u1 / 3.0, -SQRT_PI_2 * (np.sqrt(q) * cq * u0 + (cq + q * sq) / q**1.5 * u1)
        )
        return ModeCoefficients(ap, am, model.kind)
    fp, dfp, fm, dfm = mode_basis(model, beta, t0)
    det = fp * dfm - fm * dfp
    ap = (u0 * dfm - fm * u1) / det
    am = (fp * u1 - dfp * u0) / det
    return ModeCoefficients(ap, am, model.kind)


def mode_closed(model: ScaleFactorModel, labels, coeffs: ModeCoefficients, t) -> ModeState:
    """Mode values and derivatives at times ``t``."""
    fp, dfp, fm, dfm = mode_basis(model, labels, t)
    ap, am = coeffs.a_plus, coeffs.a_minus
    return ModeState(ap * fp + am * fm, ap * dfp + am * dfm)


# -------------------------------------------------------------------- RK4


@njit(cache=True)
def _rk4_nb(code, H, q2, u, v, t0, dt, n_steps, every):
    n = q2.shape[0]
    n_out = n_steps // every + 1
    us = np.empty((n_out, n))
    vs = np.empty((n_out, n))
    us[0] = u
    vs[0] = v
    u = u.copy()
    v = v.copy()
    k = 1
    for step in range(n_steps):
        t = t0 + step * dt
        for j in range(n):
            uu = u[j]
            vv = v[j]
            ku = np.empty(4)
            kv = np.empty(4)
            for stage in range(4):
                if stage == 0:
                    ts, us_, vs_ = t, uu, vv
                elif stage == 1:
                    ts, us_, vs_ = t + 0.5 * dt, uu + 0.5 * dt * ku[0], vv + 0.5 * dt * kv[0]
                elif stage == 2:
                    ts, us_, vs_ = t + 0.5 * dt, uu + 0.5 * dt * ku[1], vv + 0.5 * dt * kv[1]
                else:
                    ts, us_, vs_ = t + dt, uu + dt * ku[2], vv + dt * kv[2]
                if code == 0:
                    h = H * np.tanh(H * ts)
                    c = H / np.cosh(H * ts)
                    ia2 = c * c
                else:
                    h = 1.0
                    ia2 = np.exp(-2.0 * ts)
                ku[stage] = vs_
                kv[stage] = -3.0 * h * vs_ - q2[j] * ia2 * us_
            u[j] = uu + dt / 6.0 * (ku[0] + 2.0 * ku[1] + 2.0 * ku[2] + ku[3])
            v[j] = vv + dt / 6.0 * (kv[0] + 2.0 * kv[1] + 2.0 * kv[2] + kv[3])
        if (step + 1) % every == 0:
            us[k] = u
            vs[k] = v
            k += 1
    return us, vs


def _rk4_np(model, q2, u, v, t0, dt, n_steps, every):
    def rhs(t, u, v):
        a = float(model.a(t))
        return v, -3.0 * float(model.hubble(t)) * v - q2 / (a * a) * u

    us, vs = [u.copy()], [v.copy()]
    for step in range(n_steps):
        t = t0 + step * dt
        k1u, k1v = rhs(t, u, v)
        k2u, k2v = rhs(t + 0.5 * dt, u + 0.5 * dt * k1u, v + 0.5 * dt * k1v)
        k3u, k3v = rhs(t + 0.5 * dt, u + 0.5 * dt * k2u, v + 0.5 * dt * k2v)
        k4u, k4v = rhs(t + dt, u + dt * k3u, v + dt * k3v)
        u = u + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if (step + 1) % every == 0:
            us.append(u)
            vs.append(v)
    return np.array(us), np.array(vs)


@dataclass(frozen=True)
class ModeTrajectory:
    t: np.ndarray  # (n_samples,)
    u: np.ndarray  # (n_samples, n_labels)
    du: np.ndarray


def mode_ode_rk4(
    model: ScaleFactorModel, labels, u0, u0prime, t0: float, t1: float, dt: float, every: int = 1
) -> ModeTrajectory:
    """Classical RK4 integration of the mode equation for several labels at once."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    beta = np.atleast_1d(_betas(labels))
    q2 = beta * beta - 1.0
    u = np.broadcast_to(np.asarray(u0, dtype=float), q2.shape).copy()
    v = np.broadcast_to(np.asarray(u0prime, dtype=float), q2.shape).copy()
    n_steps = int(round((t1 - t0) / dt))
    every = max(1, int(every))
    if JIT_ENABLED and model.code >= 0:
        us, vs = _rk4_nb(model.code, float(model.H), q2, u, v, float(t0), float(dt), n_steps, every)
    else:
        us, vs = _rk4_np(model, q2, u, v, float(t0), float(dt), n_steps, every)
    t = t0 + dt * every * np.arange(len(us))
    return ModeTrajectory(t, us, vs)


# ------------------------------------------------------ asymptotic profile


def asymptotic_profile(model: ScaleFactorModel, labels, coeffs: ModeCoefficients) -> np.ndarray:
    """Per-mode limit ``u_q(infinity)``."""
    beta = _betas(labels)
    q2 = beta * beta - 1.0
    ap = np.asarray(coeffs.a_plus, dtype=float)
    if model.kind == DESITTER:
        return -SQRT_2_PI * ap
    if model.kind == INFLATING:
        q = np.sqrt(np.where(q2 == 0, 1.0, q2))
        return np.where(q2 == 0, ap, -SQRT_2_PI * q**-1.5 * ap)
    raise ValueError("asymptotic profile needs a named model")


def profile_correction(model: ScaleFactorModel, labels, coeffs: ModeCoefficients, t) -> np.ndarray:
    """Leading term of ``u_q(t) - u_q(infinity)`` for large ``t``."""
    beta = _betas(labels)
    q2 = beta * beta - 1.0
    ap = np.asarray(coeffs.a_plus, dtype=float)
    if model.kind == DESITTER:
        x = 2.0 / (1.0 + np.exp(2.0 * model.H * np.asarray(t)))  # 1 - tanh(Ht)
        return -SQRT_2_PI * q2 * ap * x
    if model.kind == INFLATING:
        q = np.sqrt(q2)
        return -np.exp(-2.0 * np.asarray(t)) * 0.5 * SQRT_2_PI * np.sqrt(q) * ap
    raise ValueError("asymptotic profile needs a named model")


def profile_from_operator(labels, u0) -> np.ndarray:
    """``(q^2+1)^(-1/2) sin(pi/2 sqrt(q^2+1)) u_q(0)``: the de Sitter limit of data at rest."""
    beta = _betas(labels)
    return np.sin(0.5 * math.pi * beta) / beta * np.asarray(u0, dtype=float)


def mode_sum(labels, values, eigenfunctions) -> np.ndarray:
    """Assemble a field ``sum_q values_q Psi_q`` from sampled eigenfunctions.

    ``eigenfunctions`` has shape ``(n_labels, n_points)``.
    """
    return np.asarray(values) @ np.asarray(eigenfunctions)


@dataclass(frozen=True)
class BranchData:
    """Mode data at ``t = 0`` of the growing (plus) and decaying (minus) branches."""

    plus_u: np.ndarray
    plus_du: np.ndarray
    minus_u: np.ndarray
    minus_du: np.ndarray


def split_plus_minus(model: ScaleFactorModel, labels, coeffs: ModeCoefficients) -> BranchData:
    fp, dfp, fm, dfm = mode_basis(model, labels, 0.0)
    ap, am = coeffs.a_plus, coeffs.a_minus
    return BranchData(ap * fp, ap * dfp, am * fm, am * dfm)


def desitter_plus_data(labels, u0, u0prime, H: float = 1.0) -> np.ndarray:
    """Plus-branch data from the initial data (de Sitter).

    Only the constant mode changes: it gains ``pi/(4H)`` times the mean
    velocity; the plus branch starts at rest.
    """
    beta = _betas(labels)
    return np.where(beta == 1, np.asarray(u0) + math.pi / (4.0 * H) * np.asarray(u0prime), u0)


def profile_l2_identity(model: ScaleFactorModel, labels, coeffs: ModeCoefficients):
    """Both sides of ``||Psi_inf||_L2^2 = ||Psi+(0)||_{H^-1}^2`` (de Sitter)."""
    beta = _betas(labels)
    u_inf = asymptotic_profile(model, labels, coeffs)
    plus0 = split_plus_minus(model, labels, coeffs).plus_u
    return float(np.sum(u_inf**2)), float(np.sum(plus0**2 / beta**2))


def profile_gradient_identity(model: ScaleFactorModel, labels, u0, u0prime, m: int = 0):
    """Both sides of ``||grad Psi_inf||_{H^m}^2 = ||grad Psi(0)||_{H^(m-1)}^2`` (de Sitter)."""
    beta = _betas(labels)
    q2 = beta * beta - 1.0
    coeffs = coeffs_from_data(model, labels, u0, u0prime)
    u_inf = asymptotic_profile(model, labels, coeffs)
    u0 = np.broadcast_to(np.asarray(u0, dtype=float), beta.shape)
    lhs = np.sum((q2 + 1.0) ** m * q2 * u_inf**2)
    rhs = np.sum((q2 + 1.0) ** (m - 1) * q2 * u0**2)
    return float(lhs), float(rhs)


def energy_kernel(q):
    """``q + sin(2q) + cos(q)^2 / q``: ``(pi/2) (|d_t Psi+|^2 + q^2 |Psi+|^2)`` per unit ``A+^2``."""
    q = np.asarray(q, dtype=float)
    return q + np.sin(2.0 * q) + np.cos(q) ** 2 / q


@dataclass(frozen=True)
class ProfileNormReport:
    gradient_sq: float
    gradient_sq_series: float
    energy: float
    energy_series: float
    ratio: float
    bracket: float

    @property
    def inside(self) -> bool:
        return 1.0 / self.bracket <= self.ratio <= self.bracket


def profile_bracket(beta_max: int = 201) -> float:
    """Constant ``c`` with ``c^-1 <= E_-1 / ||grad Psi_inf||^2 <= c`` for labels up to ``beta_max``."""
    beta = _betas([lab for lab in eigen_betas(beta_max) if lab.beta > 1])
    q2 = beta * beta - 1.0
    q = np.sqrt(q2)
    r = energy_kernel(q) * q / (q2 + 1.0)
    return float(max(r.max(), 1.0 / r.min()))


def profile_norm_check(labels, a_plus, beta_max: int = 201) -> ProfileNormReport:
    """Compare ``E_-1(Psi+, 0)`` with ``||grad Psi_inf||^2`` (inflating model).

    Both quantities are computed from the Bessel values of the plus branch
    and from their series forms.
    """
    from .models import inflating

    beta = _betas(labels)
    q2 = beta * beta - 1.0
    keep = q2 > 0
    beta, q2 = beta[keep], q2[keep]
    ap = np.broadcast_to(np.asarray(a_plus, dtype=float), keep.shape)[keep]
    q = np.sqrt(q2)
    model = inflating()
    coeffs = ModeCoefficients(ap, np.zeros_like(ap), model.kind)
    u_inf = asymptotic_profile(model, beta, coeffs)
    grad = float(np.sum(q2 * u_inf**2))
    grad_series = float(2.0 / math.pi * np.sum(ap**2 / q))
    fp, dfp, _, _ = mode_basis(model, beta, 0.0)
    energy = float(np.sum((dfp**2 + q2 * fp**2) * ap**2 / (q2 + 1.0)))
    energy_series = float(2.0 / math.pi * np.sum(energy_kernel(q) * ap**2 / (q2 + 1.0)))
    ratio = energy / grad if grad > 0 else float("nan")
    return ProfileNormReport(grad, grad_series, energy, energy_series, ratio, profile_bracket(beta_max))
