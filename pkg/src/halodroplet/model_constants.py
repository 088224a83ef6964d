"""Model parameters and the scalar constants they determine.

The model is a two-species disc gas (Widom-Rowlinson type) on a flat square
torus: particles carry closed discs of radius 2, the halo of a configuration
is the union of its discs, and configurations are weighted by
(kappa*beta)^N * exp(-beta*V) with V the halo area. The droplet analysis
singles out one radius, the critical radius r_c = 2*kappa/(kappa-1), and a
triple of expansion coefficients (c1, c2, c3) controlling the second-order
surface energy of near-circular droplets.

The second half of the module implements the scalar renewal law that governs
angular gaps of near-critical droplets: the density q0(u) = sqrt(2*pi*u) *
exp(-u^3/24) on u >= 0, its exponential tilt q*(u) = q0(u)*exp(-tau*u), the
unique tau* making q* a probability density, and the mean/variance of that
density. All integrals use composite Gauss-Legendre on the u-interval
[0, 40] after the substitution u = v^2, which removes the square-root
derivative singularity at u = 0 and makes the panel rule converge to
machine precision. The tail beyond u = 40 is below exp(-2600) and ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Disc radius is fixed by the model; halo discs never carry any other radius.
DISC_RADIUS = 2.0

# Halo area of a single isolated particle.
SINGLE_DISC_AREA = 4.0 * math.pi

_U_MAX = 40.0
_PANELS_DEFAULT = 200

# 8-point Gauss-Legendre rule on [-1, 1]; panels rescale it.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class ModelParams:
    """Validated (kappa, beta, torus side) triple.

    Constraints: kappa > 1 (otherwise no critical radius exists), beta > 0,
    side > 4 (a single disc must fit without self-overlap), and
    side / 2 > r_c so that the critical droplet fits the fundamental domain.
    """

    kappa: float
    beta: float
    side: float

    def __post_init__(self) -> None:
        if not (self.kappa > 1.0):
            raise ValueError(f"kappa must exceed 1, got {self.kappa}")
        if not (self.beta > 0.0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not (self.side > 4.0):
            raise ValueError(f"torus side must exceed 4, got {self.side}")
        r_c = critical_radius(self.kappa)
        if not (self.side / 2.0 > r_c):
            raise ValueError(
                f"torus side {self.side} too small: side/2 must exceed the "
                f"critical radius {r_c:.6g}"
            )

    @property
    def r_c(self) -> float:
        return critical_radius(self.kappa)

    @property
    def area(self) -> float:
        return self.side * self.side

    @property
    def activity(self) -> float:
        """Effective activity kappa*beta*exp(-4*pi*beta) of an isolated disc."""
        return self.kappa * self.beta * math.exp(-SINGLE_DISC_AREA * self.beta)


@dataclass(frozen=True)
class DerivedConstants:
    """Critical radius and expansion coefficients for a given kappa.

    c1 multiplies the cubed-angle sum, c3 the squared-slope and
    squared-height sums, c2 the linear height sum in the droplet volume
    expansion; g is the scale factor turning beta^(1/3) into the angular
    intensity, and phi_star is the surface free energy of the critical
    droplet profile.
    """

    kappa: float
    r_c: float
    c1: float
    c2: float
    c3: float
    g: float
    phi_star: float

    def intensity(self, beta: float) -> float:
        """Angular Poisson intensity g * beta^(1/3)."""
        if beta <= 0.0:
            raise ValueError(f"beta must be positive, got {beta}")
        return self.g * beta ** (1.0 / 3.0)


@dataclass(frozen=True)
class RenewalLaw:
    """Tilted renewal density summary: tau*, normalisation, mean, variance."""

    tau_star: float
    residual: float
    mu: float
    sigma_sq: float


def critical_radius(kappa: float) -> float:
    """Radius at which growing a droplet stops paying: 2*kappa/(kappa-1)."""
    if not (kappa > 1.0):
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    return 2.0 * kappa / (kappa - 1.0)


def phi_profile(radius: float, kappa: float) -> float:
    """Free-energy profile pi*R^2 - kappa*pi*(R-2)^2 of a round droplet.

    For R < 2 the eroded disc is empty and the second term vanishes.
    The profile is maximised over R at the critical radius.
    """
    if radius < 0.0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    if not (kappa > 1.0):
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    inner = max(radius - DISC_RADIUS, 0.0)
    return math.pi * radius * radius - kappa * math.pi * inner * inner


def derived_constants(kappa: float) -> DerivedConstants:
    """Build the coefficient bundle for one kappa.

    c1 has two algebraically equal forms, (1/48)*r_c^2*(r_c-2) and g^3/24;
    both are computed and must agree to 1e-12 relatively, guarding against
    transcription slips in either formula.
    """
    r_c = critical_radius(kappa)
    c1_geom = (r_c * r_c * (r_c - 2.0)) / 48.0
    g = (2.0 * kappa) ** (2.0 / 3.0) / (kappa - 1.0)
    c1_scale = g ** 3 / 24.0
    if abs(c1_geom - c1_scale) > 1e-12 * max(1.0, abs(c1_geom)):
        raise AssertionError(
            f"c1 cross-check failed: {c1_geom!r} vs {c1_scale!r} at kappa={kappa}"
        )
    return DerivedConstants(
        kappa=kappa,
        r_c=r_c,
        c1=c1_geom,
        c2=r_c,
        c3=(kappa - 1.0) / 2.0,
        g=g,
        phi_star=phi_profile(r_c, kappa),
    )


def q_star_density(u, tau: float = 0.0):
    """Tilted renewal density sqrt(2*pi*u) * exp(-u^3/24 - tau*u).

    Accepts scalars or arrays; u must be nonnegative. tau = 0 gives the
    untilted kernel q0, whose total mass is 4*pi/sqrt(3).
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("q_star_density requires u >= 0")
    out = np.sqrt(2.0 * math.pi * arr) * np.exp(-arr ** 3 / 24.0 - tau * arr)
    if np.isscalar(u) or getattr(u, "ndim", 1) == 0:
        return float(out)
    return out


def _panel_nodes(n_panels: int, u_max: float):
    # Panels are uniform in v = sqrt(u); integrand there is analytic.
    v_max = math.sqrt(u_max)
    edges = np.linspace(0.0, v_max, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    weights = half[:, None] * _GL_WEIGHTS[None, :]
    return nodes.ravel(), weights.ravel()


def q_star_moment(
    tau: float,
    power: int = 0,
    n_panels: int = _PANELS_DEFAULT,
    u_max: float = _U_MAX,
) -> float:
    """Integral of u^power * q*(u; tau) over [0, u_max].

    Composite Gauss-Legendre after u = v^2: the transformed integrand
    2*sqrt(2*pi) * v^(2+2*power) * exp(-tau*v^2 - v^6/24) is entire in v.
    """
    if n_panels < 1:
        raise ValueError("n_panels must be at least 1")
    v, w = _panel_nodes(n_panels, u_max)
    vals = (
        2.0
        * math.sqrt(2.0 * math.pi)
        * v ** (2 + 2 * power)
        * np.exp(-tau * v * v - v ** 6 / 24.0)
    )
    return float(np.dot(w, vals))


def q_star_norm(
    tau: float, n_panels: int = _PANELS_DEFAULT, u_max: float = _U_MAX
) -> float:
    """Total mass of q*(.; tau)."""
    return q_star_moment(tau, power=0, n_panels=n_panels, u_max=u_max)


def solve_tau_star(
    tol: float = 1e-12,
    n_panels: int = _PANELS_DEFAULT,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Tilt making q* a probability density.

    Safeguarded root find of F(tau) = mass(tau) - 1 on the bracket [0, 10]:
    secant steps accepted while they land strictly inside the bracket,
    bisection otherwise. F(0) = 4*pi/sqrt(3) - 1 > 0 and F(10) < 0, and F is
    strictly decreasing, so the root is unique. Returns (tau_star, residual)
    with residual = |mass(tau_star) - 1|.
    """
    lo, hi = 0.0, 10.0
    f_lo = q_star_norm(lo, n_panels) - 1.0
    f_hi = q_star_norm(hi, n_panels) - 1.0
    if f_lo <= 0.0 or f_hi >= 0.0:
        raise RuntimeError("tau* bracket [0, 10] does not straddle the root")
    a, fa = lo, f_lo
    b, fb = hi, f_hi
    x, fx = b, fb
    for _ in range(max_iter):
        # Secant candidate from the current bracket endpoints.
        denom = fb - fa
        if denom != 0.0:
            cand = b - fb * (b - a) / denom
        else:
            cand = 0.5 * (a + b)
        if not (a < cand < b):
            cand = 0.5 * (a + b)
        fc = q_star_norm(cand, n_panels) - 1.0
        if fc > 0.0:
            a, fa = cand, fc
        else:
            b, fb = cand, fc
        x, fx = cand, fc
        if abs(fx) < tol or (b - a) < 1e-15:
            break
    return x, abs(fx)


def renewal_moments(
    tau: float, n_panels: int = _PANELS_DEFAULT
) -> tuple[float, float]:
    """Mean and variance of u under the normalised tilt q*(.; tau)."""
    mass = q_star_moment(tau, 0, n_panels)
    m1 = q_star_moment(tau, 1, n_panels) / mass
    m2 = q_star_moment(tau, 2, n_panels) / mass
    return m1, m2 - m1 * m1


def renewal_law(
    tol: float = 1e-12, n_panels: int = _PANELS_DEFAULT
) -> RenewalLaw:
    """Solve for tau* and package it with the moments of q*."""
    tau_star, residual = solve_tau_star(tol=tol, n_panels=n_panels)
    mu, sigma_sq = renewal_moments(tau_star, n_panels)
    return RenewalLaw(tau_star=tau_star, residual=residual, mu=mu, sigma_sq=sigma_sq)
