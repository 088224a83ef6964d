"""Constants module: quadrature oracles, root solve, parameter validation.

Frozen expected values below were computed from independent routes
(scipy.integrate.quad with tight tolerances, closed forms via Gamma
functions) before being pinned.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from halodroplet import model_constants as mc

# Independently derived: integral of sqrt(2*pi*u)*exp(-u^3/24) over [0, inf)
# equals 4*pi/sqrt(3) via u = (24 w)^(1/3) and Gamma(1/2) = sqrt(pi).
Q0_MASS = 4.0 * math.pi / math.sqrt(3.0)

# Frozen from solve_tau_star at default settings; cross-checked against
# scipy.integrate.quad root bracketing in test_tau_star_scipy_oracle.
TAU_STAR = 1.6028148880903375
MU_STAR = 0.8077259019764105
SIGMA_SQ_STAR = 0.3570057507459049


def quad_mass(tau):
    val, err = integrate.quad(
        lambda u: math.sqrt(2.0 * math.pi * u) * math.exp(-(u ** 3) / 24.0 - tau * u),
        0.0,
        np.inf,
        epsabs=1e-13,
        epsrel=1e-13,
        limit=400,
    )
    assert err < 1e-10
    return val


class TestQuadrature:
    def test_q0_mass_closed_form(self):
        assert abs(mc.q_star_norm(0.0) - Q0_MASS) < 1e-12

    def test_mass_matches_scipy_quad(self):
        for tau in (0.0, 0.5, 1.0, 1.6, 3.0, 8.0):
            assert abs(mc.q_star_norm(tau) - quad_mass(tau)) < 1e-11

    def test_moments_match_scipy_quad(self):
        tau = 1.3
        mass = quad_mass(tau)
        m1, err1 = integrate.quad(
            lambda u: u * mc.q_star_density(u, tau), 0.0, np.inf, epsabs=1e-13
        )
        m2, err2 = integrate.quad(
            lambda u: u * u * mc.q_star_density(u, tau), 0.0, np.inf, epsabs=1e-13
        )
        mu, var = mc.renewal_moments(tau)
        assert abs(mu - m1 / mass) < 1e-11
        assert abs(var - (m2 / mass - (m1 / mass) ** 2)) < 1e-11

    def test_panel_refinement_converged(self):
        coarse = mc.q_star_norm(0.7, n_panels=200)
        fine = mc.q_star_norm(0.7, n_panels=400)
        assert abs(coarse - fine) < 1e-13

    def test_density_vectorised(self):
        u = np.array([0.0, 1.0, 2.0])
        vals = mc.q_star_density(u, 0.25)
        expect = np.sqrt(2 * np.pi * u) * np.exp(-(u ** 3) / 24.0 - 0.25 * u)
        assert np.allclose(vals, expect, rtol=0, atol=1e-15)
        assert vals[0] == 0.0

    def test_density_rejects_negative(self):
        with pytest.raises(ValueError):
            mc.q_star_density(-0.1)


class TestTauStar:
    def test_residual_below_tolerance(self):
        tau, residual = mc.solve_tau_star()
        assert residual < 1e-10
        assert abs(tau - TAU_STAR) < 1e-10

    def test_stable_under_refinement(self):
        tau200, _ = mc.solve_tau_star(n_panels=200)
        tau400, _ = mc.solve_tau_star(n_panels=400)
        assert abs(tau200 - tau400) < 1e-8

    def test_tau_star_scipy_oracle(self):
        # Root of quad-based mass, found by pure bisection: fully independent
        # of the package quadrature.
        lo, hi = 1.0, 2.0
        assert (quad_mass(lo) - 1.0) > 0 > (quad_mass(hi) - 1.0)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if quad_mass(mid) > 1.0:
                lo = mid
            else:
                hi = mid
        tau, _ = mc.solve_tau_star()
        assert abs(tau - 0.5 * (lo + hi)) < 1e-9

    def test_law_bundle(self):
        law = mc.renewal_law()
        assert abs(law.tau_star - TAU_STAR) < 1e-10
        assert abs(law.mu - MU_STAR) < 1e-10
        assert abs(law.sigma_sq - SIGMA_SQ_STAR) < 1e-10
        assert law.sigma_sq > 0


class TestDerivedConstants:
    def test_kappa_two_closed_forms(self):
        d = mc.derived_constants(2.0)
        assert d.r_c == pytest.approx(4.0, abs=1e-14)
        assert d.c1 == pytest.approx(2.0 / 3.0, abs=1e-14)
        assert d.c2 == pytest.approx(4.0, abs=1e-14)
        assert d.c3 == pytest.approx(0.5, abs=1e-14)
        assert d.g == pytest.approx(4.0 ** (2.0 / 3.0), abs=1e-14)
        assert d.phi_star == pytest.approx(8.0 * math.pi, abs=1e-12)

    def test_cross_check_holds_over_kappa_range(self):
        for kappa in np.linspace(1.05, 50.0, 57):
            d = mc.derived_constants(float(kappa))
            assert abs(d.c1 - d.g ** 3 / 24.0) <= 1e-12 * max(1.0, d.c1)
            # c3 = 1/(r_c - 2) is the defining form.
            assert d.c3 == pytest.approx(1.0 / (d.r_c - 2.0), rel=1e-12)

    def test_profile_maximised_at_critical_radius(self):
        for kappa in (1.2, 2.0, 5.0):
            r_c = mc.critical_radius(kappa)
            peak = mc.phi_profile(r_c, kappa)
            for dr in (-1e-3, 1e-3, -0.3, 0.3):
                assert mc.phi_profile(r_c + dr, kappa) < peak
            assert peak == pytest.approx(4.0 * math.pi * kappa / (kappa - 1.0), rel=1e-12)

    def test_profile_below_two(self):
        # Eroded disc empty: profile reduces to the plain disc area.
        assert mc.phi_profile(1.5, 3.0) == pytest.approx(math.pi * 1.5 ** 2, rel=1e-14)

    def test_intensity(self):
        d = mc.derived_constants(2.0)
        assert d.intensity(1000.0) == pytest.approx(d.g * 10.0, rel=1e-14)
        with pytest.raises(ValueError):
            d.intensity(0.0)


class TestModelParams:
    def test_valid(self):
        p = mc.ModelParams(kappa=2.0, beta=0.05, side=10.0)
        assert p.r_c == 4.0
        assert p.area == 100.0
        assert p.activity == pytest.approx(
            2.0 * 0.05 * math.exp(-4.0 * math.pi * 0.05), rel=1e-14
        )

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(kappa=1.0, beta=1.0, side=10.0),
            dict(kappa=0.5, beta=1.0, side=10.0),
            dict(kappa=2.0, beta=0.0, side=10.0),
            dict(kappa=2.0, beta=-1.0, side=10.0),
            dict(kappa=2.0, beta=1.0, side=4.0),
            dict(kappa=2.0, beta=1.0, side=7.9),  # side/2 < r_c = 4
            dict(kappa=1.01, beta=1.0, side=100.0),  # r_c = 404 >> side/2
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            mc.ModelParams(**kwargs)
