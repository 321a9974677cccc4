import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dodecawave import group, spectral
from dodecawave.models import de_sitter, inflating

XS = np.array([-0.93, -0.51, -0.07, 0.12, 0.48, 0.77, 0.96])
MODELS = [de_sitter(1.0), de_sitter(0.7), inflating()]


def multiplicity(beta):
    # dimension of the I*-invariant part of the beta^2-1 eigenspace of S^3
    w = np.clip(group.group_quaternions()[:, 0], -1, 1)
    th = np.arccos(w)
    chars = np.empty_like(th)
    for i, t in enumerate(th):
        if abs(math.sin(t)) < 1e-12:
            chars[i] = beta * (1 if math.cos(t) > 0 else (-1) ** (beta - 1))
        else:
            chars[i] = math.sin(beta * t) / math.sin(t)
    return round(beta * chars.sum() / 120)


def test_admissible_labels_match_character_formula():
    for beta in range(1, 130):
        assert spectral.is_admissible(beta) == (multiplicity(beta) > 0), beta
    assert multiplicity(13) == 13
    assert [lab.beta for lab in spectral.eigen_betas(40)] == [1, 13, 21, 25, 31, 33, 37]


def test_label_properties():
    lab = spectral.EigenLabel(13)
    assert lab.q2 == 168 and lab.q == pytest.approx(math.sqrt(168))
    assert [spectral.EigenLabel(b).sign for b in (1, 3, 5, 7)] == [1, -1, 1, -1]


@pytest.mark.parametrize("nu", [0.5, 12.5, 20.5, 56.5, 200.5])
def test_ferrers_closed_forms_match_mpmath(nu):
    for x in XS:
        P = mp.legenp(nu, 1.5, x, type=2)
        Q = mp.legenq(nu, 1.5, x, type=2)
        scale = float(abs(nu) ** 1.5 + 1)
        assert spectral.ferrers_P(1.5, nu, x) == pytest.approx(float(P), abs=1e-11 * scale)
        assert spectral.ferrers_Q(1.5, nu, x) == pytest.approx(float(Q), abs=1e-11 * scale)


def test_ferrers_minus_three_halves_matches_mpmath():
    for x in XS:
        assert spectral.ferrers_P(-1.5, 0.5, x) == pytest.approx(float(mp.legenp(0.5, -1.5, x, type=2)), rel=1e-12)


@pytest.mark.parametrize("nu, rtol", [(0.5, 1e-12), (12.5, 1e-7), (20.5, 1e-5)])
def test_series_agrees_with_closed_forms_for_small_degree(nu, rtol):
    # the series loses digits to cancellation as the degree grows
    x = XS[np.abs(XS) < 0.8]
    for fn in (spectral.ferrers_P, spectral.ferrers_Q):
        closed = fn(1.5, nu, x)
        series = fn(1.5, nu, x, method="series")
        np.testing.assert_allclose(series, closed, rtol=rtol, atol=rtol * nu**1.5)
    np.testing.assert_allclose(spectral.ferrers_P(-1.5, 0.5, x, method="series"), spectral.ferrers_P(-1.5, 0.5, x),
                               rtol=1e-12)


def test_ferrers_derivatives_by_finite_differences():
    h = 1e-6
    for nu in (0.5, 12.5):
        for x in (-0.4, 0.3, 0.7):
            fd = (spectral.ferrers_P(1.5, nu, x + h) - spectral.ferrers_P(1.5, nu, x - h)) / (2 * h)
            assert spectral.ferrers_P_derivative(1.5, nu, x) == pytest.approx(fd, rel=1e-6, abs=1e-6)
            fd = (spectral.ferrers_Q(1.5, nu, x + h) - spectral.ferrers_Q(1.5, nu, x - h)) / (2 * h)
            assert spectral.ferrers_Q_derivative(1.5, nu, x) == pytest.approx(fd, rel=1e-6, abs=1e-6)
    fd = (spectral.ferrers_P(-1.5, 0.5, 0.3 + h) - spectral.ferrers_P(-1.5, 0.5, 0.3 - h)) / (2 * h)
    assert spectral.ferrers_P_derivative(-1.5, 0.5, 0.3) == pytest.approx(fd, rel=1e-7)


def test_ferrers_rejects_bad_arguments():
    with pytest.raises(ValueError):
        spectral.ferrers_P(1.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        spectral.ferrers_P(0.5, 0.5, 0.2)
    with pytest.raises(ValueError):
        spectral.ferrers_P(1.5, 0.5, 0.2, method="magic")


@pytest.mark.parametrize("kind, order", [("J", 0.5), ("Y", 0.5), ("J", 1.5), ("Y", 1.5)])
def test_bessel_half_matches_mpmath(kind, order):
    f = mp.besselj if kind == "J" else mp.bessely
    for x in (0.01, 0.04, 0.3, 2.0, 17.0, 150.0):
        assert spectral.bessel_half(kind, order, x) == pytest.approx(float(f(order, x)), rel=1e-11, abs=1e-15)
    with pytest.raises(ValueError):
        spectral.bessel_half(kind, order, 0.0)


def ode_oracle(model, beta, u0, u1, t0, t1):
    q2 = beta * beta - 1

    def rhs(t, y):
        a = float(model.a(t))
        return [y[1], -3 * float(model.hubble(t)) * y[1] - q2 / a**2 * y[0]]

    sol = solve_ivp(rhs, (t0, t1), [u0, u1], method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[:, -1]


@pytest.mark.parametrize("model", MODELS, ids=["ds1", "ds07", "infl"])
@pytest.mark.parametrize("t0", [0.0, 1.3])
def test_closed_form_modes_solve_the_mode_equation(model, t0):
    betas = np.array([1, 13, 21, 25])
    u0 = np.array([0.4, -1.2, 0.8, 0.3])
    u1 = np.array([0.5, 0.9, -0.2, 1.1])
    coeffs = spectral.coeffs_from_data(model, betas, u0, u1, t0)
    start = spectral.mode_closed(model, betas, coeffs, t0)
    np.testing.assert_allclose(start.u, u0, atol=1e-12)
    np.testing.assert_allclose(start.du, u1, atol=1e-12)
    later = spectral.mode_closed(model, betas, coeffs, t0 + 2.0)
    for k, b in enumerate(betas):
        u, du = ode_oracle(model, b, u0[k], u1[k], t0, t0 + 2.0)
        assert later.u[k] == pytest.approx(u, abs=1e-9)
        assert later.du[k] == pytest.approx(du, abs=1e-8)


@pytest.mark.parametrize("model", MODELS[::2], ids=["ds", "infl"])
def test_explicit_coefficients_match_generic_solve(model):
    betas = np.array([1, 13, 31, 61])
    u0, u1 = np.array([1.0, -0.5, 0.2, 0.7]), np.array([0.3, 0.4, -1.0, 0.1])
    explicit = spectral.coeffs_from_data(model, betas, u0, u1, 0.0)
    fp, dfp, fm, dfm = spectral.mode_basis(model, betas, 0.0)
    det = fp * dfm - fm * dfp
    np.testing.assert_allclose(explicit.a_plus, (u0 * dfm - fm * u1) / det, rtol=1e-10)
    np.testing.assert_allclose(explicit.a_minus, (fp * u1 - dfp * u0) / det, rtol=1e-10)


def test_constant_mode_limits():
    # inflating: u = u0 + u0'(1 - e^{-3t})/3; de Sitter: u' = u0' sech^3(Ht)
    for u0, u1 in ((1.0, 0.0), (0.3, 0.9)):
        c = spectral.coeffs_from_data(inflating(), 1, u0, u1)
        assert float(c.a_plus) == pytest.approx(u0 + u1 / 3) and float(c.a_minus) == pytest.approx(-u1 / 3)
        assert float(spectral.asymptotic_profile(inflating(), 1, c)) == pytest.approx(u0 + u1 / 3)
        H = 0.7
        c = spectral.coeffs_from_data(de_sitter(H), 1, u0, u1)
        assert float(spectral.asymptotic_profile(de_sitter(H), 1, c)) == pytest.approx(u0 + math.pi * u1 / (4 * H))


@pytest.mark.parametrize("model", MODELS, ids=["ds1", "ds07", "infl"])
def test_asymptotic_profile_and_leading_correction(model):
    betas = np.array([13, 21, 33])
    coeffs = spectral.coeffs_from_data(model, betas, [1.0, -0.4, 0.6], [0.2, 0.5, -0.3])
    u_inf = spectral.asymptotic_profile(model, betas, coeffs)
    T = 14.0 / (model.H if model.kind == "desitter" else 1.0)
    late = spectral.mode_closed(model, betas, coeffs, T).u
    np.testing.assert_allclose(late, u_inf, atol=1e-8)
    t = 6.0 / model.H if model.kind == "desitter" else 9.0
    diff = spectral.mode_closed(model, betas, coeffs, t).u - u_inf
    ratio = diff / spectral.profile_correction(model, betas, coeffs, t)
    np.testing.assert_allclose(ratio, 1.0, atol=0.01)


def test_rk4_matches_closed_form():
    betas = [1, 13, 21]
    for model in (de_sitter(), inflating()):
        traj = spectral.mode_ode_rk4(model, betas, 1.0, 0.5, 0.0, 3.0, 1e-3, every=500)
        coeffs = spectral.coeffs_from_data(model, betas, 1.0, 0.5)
        exact = spectral.mode_closed(model, np.array(betas)[None, :], coeffs, traj.t[:, None])
        np.testing.assert_allclose(traj.u, exact.u, atol=1e-8)
        assert traj.u.shape == (7, 3)
    with pytest.raises(ValueError):
        spectral.mode_ode_rk4(inflating(), betas, 1.0, 0.0, 0.0, 1.0, 0.0)


def test_desitter_profile_of_data_at_rest(rng):
    labels = spectral.eigen_betas(101)
    u0 = rng.standard_normal(len(labels))
    model = de_sitter()
    coeffs = spectral.coeffs_from_data(model, labels, u0, 0.0)
    np.testing.assert_allclose(spectral.asymptotic_profile(model, labels, coeffs),
                               spectral.profile_from_operator(labels, u0), atol=1e-12)
    for m in (0, 1, 2):
        lhs, rhs = spectral.profile_gradient_identity(model, labels, u0, 0.0, m)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_desitter_l2_identity(rng):
    labels = spectral.eigen_betas(81)
    model = de_sitter()
    coeffs = spectral.coeffs_from_data(model, labels, rng.standard_normal(len(labels)), rng.standard_normal(len(labels)))
    lhs, rhs = spectral.profile_l2_identity(model, labels, coeffs)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_energy_kernel_against_bessel_values():
    for q in (math.sqrt(168), math.sqrt(440), 30.3):
        fp = mp.bessely(1.5, q)
        dfp = -q * mp.bessely(0.5, q)
        direct = mp.pi / 2 * (dfp**2 + q**2 * fp**2)
        assert spectral.energy_kernel(q) == pytest.approx(float(direct), rel=1e-12)


def test_profile_norm_check(rng):
    labels = spectral.eigen_betas(201)
    rep = spectral.profile_norm_check(labels, rng.standard_normal(len(labels)))
    assert rep.gradient_sq == pytest.approx(rep.gradient_sq_series, rel=1e-10)
    assert rep.energy == pytest.approx(rep.energy_series, rel=1e-10)
    assert rep.inside and rep.bracket > 1
