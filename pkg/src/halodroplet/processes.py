"""Angular point processes, periodic Brownian bridges, and tilted surface
statistics for droplet boundaries.

The boundary of a near-critical droplet is modelled by a Poisson sample of
angles on the circle, with inverse-temperature-dependent intensity, and a
radial displacement field given by a mean-centred periodic Brownian bridge.
This module provides:

- angular samples with their cyclic gaps;
- the bridge covariance kernel and two samplers: exact (eigendecomposition
  of the kernel matrix at the sample times) and spectral (truncated
  Fourier synthesis with standard normal coefficients), including the
  exact quadratic functional of the spectral path;
- the exponential tilt acting on the angular gaps, with its log-weight;
- the surface statistics of a configuration (gap sums, increment energy,
  radial energy and mean, first-harmonic projections) together with the
  exact decomposition of the radial energy into mean, harmonic, and
  centred parts;
- scaled bridge increments over a fixed partition, whose covariance is the
  identity minus a rank-one projection, and the closed form of the
  exponential moment of their squared sum;
- the closed-form exponential moment of the squared-path integral;
- deterministic discretisation error bounds for smooth test functions
  along a partition, and the exact variance of the midpoint-discretised
  mean of the bridge.

All samplers draw from a caller-supplied numpy Generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from halodroplet.model_constants import derived_constants

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# replica-safe RNG


def rng_for_replica(master_seed: int, replica: int) -> np.random.Generator:
    """Independent, reproducible stream for a given replica index."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(replica,))
    )


# ---------------------------------------------------------------------------
# angular samples


@dataclass(frozen=True)
class AngularSample:
    """Sorted angles in [0, 2*pi) with cyclic gaps summing to 2*pi."""

    times: np.ndarray

    @classmethod
    def sample(cls, rng: np.random.Generator, intensity: float) -> "AngularSample":
        n = rng.poisson(TWO_PI * intensity)
        return cls(times=np.sort(rng.uniform(0.0, TWO_PI, n)))

    @classmethod
    def from_times(cls, times) -> "AngularSample":
        t = np.sort(np.asarray(times, dtype=float))
        if len(t) and (t[0] < 0.0 or t[-1] >= TWO_PI):
            raise ValueError("angles must lie in [0, 2*pi)")
        return cls(times=t)

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def thetas(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(0)
        return np.diff(self.times, append=self.times[0] + TWO_PI)


# ---------------------------------------------------------------------------
# bridge kernel and samplers


def bridge_kernel(t):
    """Stationary covariance k of the mean-centred periodic bridge:
    k(t) = ((pi - |t|)^2 - pi^2) / (4 pi) + pi / 6 on [-pi, pi],
    extended periodically; k(0) = pi/6, k(pi) = -pi/12, zero mean."""
    d = np.abs((np.asarray(t, dtype=float) + math.pi) % TWO_PI - math.pi)
    return ((math.pi - d) ** 2 - math.pi ** 2) / (4 * math.pi) + math.pi / 6


def bridge_covariance_matrix(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    return bridge_kernel(t[:, None] - t[None, :])


def increment_variance(gap):
    """Variance of a bridge increment across an arc of the given length;
    symmetric under gap -> 2*pi - gap."""
    g = np.asarray(gap, dtype=float)
    return g - g ** 2 / TWO_PI


@dataclass(frozen=True)
class BridgePath:
    """Bridge values at given times.

    method is "exact" (eigendecomposition sampling; spectral coefficients
    unavailable) or "spectral" (truncated Fourier synthesis; cosine_coeffs
    and sine_coeffs hold the standard normal mode amplitudes)."""

    times: np.ndarray
    values: np.ndarray
    method: str
    cosine_coeffs: np.ndarray | None = None
    sine_coeffs: np.ndarray | None = None

    def integral_squared(self) -> float:
        """Exact integral of the squared path over the full circle; only
        available for spectral paths, where it is the coefficient sum
        sum_k (A_k^2 + A*_k^2) / k^2."""
        if self.method != "spectral":
            raise ValueError("integral_squared needs a spectral path")
        ks = np.arange(1, len(self.cosine_coeffs) + 1)
        return float(
            np.sum((self.cosine_coeffs ** 2 + self.sine_coeffs ** 2) / ks ** 2)
        )

    def first_harmonic(self) -> tuple[float, float]:
        """The k = 1 spectral amplitudes (cosine, sine); spectral only."""
        if self.method != "spectral":
            raise ValueError("first_harmonic needs a spectral path")
        return float(self.cosine_coeffs[0]), float(self.sine_coeffs[0])


def bridge_exact(times, rng: np.random.Generator) -> BridgePath:
    """Sample the bridge at the given times from the exact finite-
    dimensional covariance. Eigenvalues more negative than -1e-10 signal
    a broken kernel and raise; small negative rounding noise is clipped."""
    t = np.asarray(times, dtype=float)
    if len(t) == 0:
        return BridgePath(times=t, values=np.zeros(0), method="exact")
    cov = bridge_covariance_matrix(t)
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < -1e-10:
        raise ValueError(f"covariance eigenvalue {vals.min()} below tolerance")
    vals = np.clip(vals, 0.0, None)
    draw = vecs @ (np.sqrt(vals) * rng.standard_normal(len(t)))
    return BridgePath(times=t, values=draw, method="exact")


def bridge_exact_batch(times, rng: np.random.Generator, draws: int) -> np.ndarray:
    """Values of independent exact-covariance draws, one row per draw."""
    t = np.asarray(times, dtype=float)
    if len(t) == 0:
        return np.zeros((draws, 0))
    cov = bridge_covariance_matrix(t)
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < -1e-10:
        raise ValueError(f"covariance eigenvalue {vals.min()} below tolerance")
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return rng.standard_normal((draws, len(t))) @ root.T


def squared_path_integral_sample(
    rng: np.random.Generator, draws: int, modes: int = 512
) -> np.ndarray:
    """Independent draws of the squared-path integral via its coefficient
    representation sum_k (A_k^2 + A*_k^2) / k^2; one value per draw."""
    inv_ks2 = 1.0 / np.arange(1, modes + 1, dtype=float) ** 2
    out = np.empty(draws)
    step = 8192
    for lo in range(0, draws, step):
        hi = min(lo + step, draws)
        a = rng.standard_normal((hi - lo, modes))
        b = rng.standard_normal((hi - lo, modes))
        out[lo:hi] = (a ** 2 + b ** 2) @ inv_ks2
    return out


def bridge_spectral(times, rng: np.random.Generator, modes: int = 512) -> BridgePath:
    """Sample the bridge by truncated Fourier synthesis:
    B(t) = (1/sqrt(pi)) sum_k (A_k cos(kt) + A*_k sin(kt)) / k with
    standard normal amplitudes. The covariance error of the truncation is
    at most 1/(pi * modes) uniformly."""
    t = np.asarray(times, dtype=float)
    a = rng.standard_normal(modes)
    b = rng.standard_normal(modes)
    ks = np.arange(1, modes + 1)
    vals = (
        (a / ks) @ np.cos(np.outer(ks, t)) + (b / ks) @ np.sin(np.outer(ks, t))
    ) / math.sqrt(math.pi)
    return BridgePath(
        times=t, values=vals, method="spectral", cosine_coeffs=a, sine_coeffs=b
    )


# ---------------------------------------------------------------------------
# exponential tilt


def tilt_components(thetas, beta: float, kappa: float) -> tuple[float, float]:
    """The entropy-like and energy-like halves of the tilt exponent:
    half-sum of log(2 pi lambda theta_i), and the cubed-gap penalty
    (lambda theta_i)^3 / 24 summed, with lambda the angular intensity."""
    th = np.asarray(thetas, dtype=float)
    d = derived_constants(kappa)
    lam = d.intensity(beta)
    if len(th) == 0:
        return 0.0, 0.0
    y0_hat = 0.5 * float(np.sum(np.log(TWO_PI * lam * th)))
    y1_hat = float(np.sum((lam * th) ** 3)) / 24.0
    return y0_hat, y1_hat


def tilt_log_weight(thetas, beta: float, kappa: float) -> float:
    y0_hat, y1_hat = tilt_components(thetas, beta, kappa)
    return y0_hat - y1_hat


# ---------------------------------------------------------------------------
# droplet configurations and surface statistics


def droplet_configuration(
    sample: AngularSample, path: BridgePath, m: float, beta: float, kappa: float
) -> np.ndarray:
    """Points at radius (r_c - 2) + (m + B_t) / sqrt((kappa-1) beta) for
    each sampled angle t."""
    d = derived_constants(kappa)
    scale = 1.0 / math.sqrt((kappa - 1.0) * beta)
    r = (d.r_c - 2.0) + (m + path.values) * scale
    t = sample.times
    return np.c_[r * np.cos(t), r * np.sin(t)]


@dataclass(frozen=True)
class SurfaceStatistics:
    """Gap and radial-field functionals of one angular sample and bridge.

    y0 is the entropy half of the tilt exponent; y1 the cubed gaps; y2 the
    squared increments over their gaps; y3 the gap-weighted squared radial
    mean-plus-field; y4 the gap-weighted radial mean-plus-field. d1 and
    d1_star are the discretised first-harmonic projections; chi is the
    radial energy with the harmonic part removed. The decomposition
    y3 = mean_shift_energy + harmonic_energy - base_mean_energy + chi
    is exact algebra and identity_residual records its float defect.
    disc_error, spectral_tail, coeff_error split chi along the continuum
    route (spectral paths only, else nan): discretisation of the energy,
    the above-first-harmonic remainder, and the harmonic discretisation.
    """

    m: float
    n: int
    y0: float
    y1: float
    y2: float
    y3: float
    y4: float
    y4_base: float
    d1: float
    d1_star: float
    chi: float
    mean_shift_energy: float
    harmonic_energy: float
    base_mean_energy: float
    identity_residual: float
    disc_error: float
    spectral_tail: float
    coeff_error: float


def surface_statistics(
    sample: AngularSample,
    path: BridgePath,
    m: float,
    beta: float,
    kappa: float,
) -> SurfaceStatistics:
    th = sample.thetas
    b = path.values
    n = sample.n
    y0, _ = tilt_components(th, beta, kappa)
    if n == 0:
        return SurfaceStatistics(
            m=m, n=0, y0=0.0, y1=0.0, y2=0.0, y3=TWO_PI * m * m, y4=TWO_PI * m,
            y4_base=0.0, d1=0.0, d1_star=0.0, chi=0.0,
            mean_shift_energy=TWO_PI * m * m, harmonic_energy=0.0,
            base_mean_energy=0.0, identity_residual=0.0,
            disc_error=math.nan, spectral_tail=math.nan, coeff_error=math.nan,
        )
    b_next = np.roll(b, -1)
    t = sample.times
    t_next = np.roll(t, -1)
    b_bar = 0.5 * (b + b_next)
    y1 = float(np.sum(th ** 3))
    y2 = float(np.sum((b_next - b) ** 2 / th))
    y3 = float(np.sum((m + b_bar) ** 2 * th))
    y4 = float(np.sum((m + b_bar) * th))
    y4_base = float(np.sum(b_bar * th))
    cos_bar = 0.5 * (b * np.cos(t) + b_next * np.cos(t_next))
    sin_bar = 0.5 * (b * np.sin(t) + b_next * np.sin(t_next))
    d1 = float(np.sum(th * cos_bar)) / math.sqrt(math.pi)
    d1_star = float(np.sum(th * sin_bar)) / math.sqrt(math.pi)
    energy = float(np.sum(b_bar ** 2 * th))
    chi = energy - d1 ** 2 - d1_star ** 2
    e1 = y4 ** 2 / TWO_PI
    e2 = d1 ** 2 + d1_star ** 2
    e3 = y4_base ** 2 / TWO_PI
    residual = y3 - (e1 + e2 - e3 + chi)
    if path.method == "spectral":
        isq = path.integral_squared()
        a1, a1s = path.first_harmonic()
        disc_error = energy - isq
        spectral_tail = isq - a1 ** 2 - a1s ** 2
        coeff_error = a1 ** 2 + a1s ** 2 - e2
    else:
        disc_error = spectral_tail = coeff_error = math.nan
    return SurfaceStatistics(
        m=m, n=n, y0=y0, y1=y1, y2=y2, y3=y3, y4=y4, y4_base=y4_base,
        d1=d1, d1_star=d1_star, chi=chi,
        mean_shift_energy=e1, harmonic_energy=e2, base_mean_energy=e3,
        identity_residual=residual,
        disc_error=disc_error, spectral_tail=spectral_tail,
        coeff_error=coeff_error,
    )


# ---------------------------------------------------------------------------
# scaled increments over a fixed partition


def scaled_increments(path: BridgePath) -> np.ndarray:
    """Cyclic bridge increments divided by the square root of their gaps."""
    t = path.times
    if len(t) < 2:
        return np.zeros(0)
    th = np.diff(t, append=t[0] + TWO_PI)
    inc = np.roll(path.values, -1) - path.values
    return inc / np.sqrt(th)


def increment_projection(thetas) -> np.ndarray:
    """The rank-one projection P with the scaled-increment covariance
    I - P; its range is spanned by the square roots of the gap fractions."""
    th = np.asarray(thetas, dtype=float)
    v = np.sqrt(th / TWO_PI)
    return np.outer(v, v)


def squared_increment_mgf(s: float, n: int) -> float:
    """Closed form of E[exp(s/2 * sum of squared scaled increments)] for a
    partition with n points: (1 - s)^(-(n-1)/2), s < 1."""
    if s >= 1.0:
        raise ValueError("exponential moment diverges for s >= 1")
    return (1.0 - s) ** (-(n - 1) / 2.0)


# ---------------------------------------------------------------------------
# squared-path exponential moment


def squared_path_mgf(s: float) -> float:
    """Closed form of E[exp(s/2 * integral of B^2)]: the spectral product
    over modes k of (1 - s/k^2)^(-1/2) per coefficient pair, which sums to
    pi sqrt(s) / sin(pi sqrt(s)) for 0 < s < 1 (and the hyperbolic
    analogue for s < 0)."""
    if s >= 1.0:
        raise ValueError("exponential moment diverges for s >= 1")
    if s == 0.0:
        return 1.0
    if s > 0:
        x = math.sqrt(s)
        return math.pi * x / math.sin(math.pi * x)
    x = math.sqrt(-s)
    return math.pi * x / math.sinh(math.pi * x)


def squared_path_mgf_truncated(s: float, modes: int) -> float:
    """Direct finite product over the first `modes` coefficient pairs."""
    if s >= 1.0:
        raise ValueError("exponential moment diverges for s >= 1")
    ks = np.arange(1, modes + 1, dtype=float)
    return float(np.exp(-np.sum(np.log1p(-s / ks ** 2))))


# ---------------------------------------------------------------------------
# deterministic discretisation errors for smooth test functions


@dataclass(frozen=True)
class FourierFunction:
    """Mean-zero periodic test function given by its Fourier coefficients:
    tau(t) = sum_k a_k cos(kt) + b_k sin(kt). Norms are exact."""

    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        ks = np.arange(1, len(self.cos_coeffs) + 1)
        return self.cos_coeffs @ np.cos(np.outer(ks, t)) + self.sin_coeffs @ np.sin(
            np.outer(ks, t)
        )

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        ks = np.arange(1, len(self.cos_coeffs) + 1)
        return (ks * self.sin_coeffs) @ np.cos(np.outer(ks, t)) - (
            ks * self.cos_coeffs
        ) @ np.sin(np.outer(ks, t))

    @property
    def norm_sq(self) -> float:
        return math.pi * float(np.sum(self.cos_coeffs ** 2 + self.sin_coeffs ** 2))

    @property
    def derivative_norm_sq(self) -> float:
        ks = np.arange(1, len(self.cos_coeffs) + 1)
        return math.pi * float(
            np.sum(ks ** 2 * (self.cos_coeffs ** 2 + self.sin_coeffs ** 2))
        )

    @property
    def integral_cos(self) -> float:
        return math.pi * float(self.cos_coeffs[0])

    @property
    def integral_sin(self) -> float:
        return math.pi * float(self.sin_coeffs[0])

    def sup_norm(self, samples: int = 4096) -> float:
        t = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        return float(np.max(np.abs(self(t))))


@dataclass(frozen=True)
class DiscretisationRow:
    name: str
    lhs: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.bound + 1e-12


@dataclass(frozen=True)
class DiscretisationReport:
    eps_n: float
    rows: tuple

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.rows)


def discretisation_report(tau: FourierFunction, times) -> DiscretisationReport:
    """The four partition sums of a smooth mean-zero test function and
    their deterministic error bounds in terms of eps_n, the cubed-gap sum:

    - pair-averaged squared sum vs the squared norm,
    - left-endpoint mean (the exact mean is zero),
    - left-endpoint first harmonics vs the exact harmonic integrals.
    """
    t = np.sort(np.asarray(times, dtype=float))
    th = np.diff(t, append=t[0] + TWO_PI)
    eps_n = float(np.sum(th ** 3))
    vals = tau(t)
    vals_next = np.roll(vals, -1)
    tau_bar = 0.5 * (vals + vals_next)
    lam1 = float(np.sum(tau_bar ** 2 * th))
    lam2 = float(np.sum(vals * th))
    lam3 = float(np.sum(vals * th * np.cos(t)))
    lam4 = float(np.sum(vals * th * np.sin(t)))
    dnorm = math.sqrt(tau.derivative_norm_sq)
    sup = tau.sup_norm()
    rows = (
        DiscretisationRow(
            "squared_sum", abs(lam1 - tau.norm_sq), math.sqrt(eps_n) * sup * dnorm
        ),
        DiscretisationRow("mean_sum", abs(lam2), math.sqrt(eps_n / 3.0) * dnorm),
        DiscretisationRow(
            "cos_sum", abs(lam3 - tau.integral_cos), 2 * math.sqrt(eps_n / 3.0) * dnorm
        ),
        DiscretisationRow(
            "sin_sum", abs(lam4 - tau.integral_sin), 2 * math.sqrt(eps_n / 3.0) * dnorm
        ),
    )
    return DiscretisationReport(eps_n=eps_n, rows=rows)


# ---------------------------------------------------------------------------
# exact variance of the discretised bridge mean


@dataclass(frozen=True)
class DiscretisedMeanStats:
    eps_n: float
    exact_variance: float
    variance_bound: float

    @property
    def ok(self) -> bool:
        return self.exact_variance <= self.variance_bound + 1e-12


def discretised_mean_stats(times) -> DiscretisedMeanStats:
    """Exact variance of the pair-averaged discretised mean of the bridge,
    sum_i mean(B at gap endpoints) * gap_i, from the covariance kernel,
    with the proved bound (pi/4) * eps_n.

    A uniform partition with n points gives exactly eps_n / 12, which is
    the tightest case known to us and rules out bounds below that rate.
    """
    t = np.sort(np.asarray(times, dtype=float))
    n = len(t)
    th = np.diff(t, append=t[0] + TWO_PI)
    w = 0.5 * (th + np.roll(th, 1))
    cov = bridge_covariance_matrix(t)
    exact = float(w @ cov @ w)
    eps_n = float(np.sum(th ** 3))
    return DiscretisedMeanStats(
        eps_n=eps_n,
        exact_variance=exact,
        variance_bound=math.pi / 4.0 * eps_n,
    )
