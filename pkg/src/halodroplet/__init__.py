"""Geometry and sampling tools for critical droplets of two-type disc gases.

The package is organised around one geometric object, the halo of a planar
point configuration (the union of closed radius-2 discs centred at its
points), and the probabilistic machinery needed to study near-circular
droplet shapes of that halo on a flat torus:

- model_constants: model parameters, the critical radius and the derived
  coefficient triple, plus the scalar renewal law whose tilt exponent
  governs droplet surface fluctuations.
- torus_geometry: exact arc-decomposition areas of halos on the torus,
  erosion interiors, Steiner-type consistency checks, Hausdorff distance
  to circles, and the isoperimetric-style rate function.
- contours: outer-contour extraction, locality/extremality predicates,
  discrete boundary functionals and the second-order volume expansion.
- processes: angular Poisson samples, periodic Brownian bridge paths,
  tilt weights and surface statistics of bridge-driven contours.
- estimators: renewal-series evaluation, self-normalised importance
  sampling, membership probabilities, Gibbs dynamics and small-system
  oracles, hole-probability estimation.
- cli: reproducible command-line entry points writing CSV + manifest.
"""

from halodroplet.model_constants import (
    ModelParams,
    DerivedConstants,
    RenewalLaw,
    critical_radius,
    phi_profile,
    derived_constants,
    q_star_density,
    solve_tau_star,
    renewal_moments,
)

__all__ = [
    "ModelParams",
    "DerivedConstants",
    "RenewalLaw",
    "critical_radius",
    "phi_profile",
    "derived_constants",
    "q_star_density",
    "solve_tau_star",
    "renewal_moments",
]

__version__ = "0.1.0"
