"""Outer contours of near-circular droplets and their boundary functionals.

A contour is a finite set of points in a thin annulus around radius R - 2,
ordered by polar angle, whose radius-2 discs chain into a closed scalloped
curve: consecutive circles intersect, and the designated intersection points
(the outward ones) form the corners of the region S bounded by the curve.
This module provides:

- the locality predicate: whether every point's disc actually contributes a
  boundary arc, decidable triplet-by-triplet through a comparison of corner
  angles, plus the definitional region test and the halo-arrangement
  extraction it must agree with;
- the discrete boundary functionals (the y-sums) built from angular gaps
  and radial offsets;
- exact closed forms for |S| and for the area of the eroded region S^-
  (polygon plus circular-segment corrections), the droplet cost difference,
  and their second-order expansions in the y-sums;
- the perimeter-weighted geometric centre;
- random contour generators (jittered polygon with a smooth radial field,
  and a Brownian-bridge-driven radial field).

Angles are taken about the origin; callers recentre beforehand if needed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from halodroplet.model_constants import DISC_RADIUS, derived_constants
from halodroplet import torus_geometry as tg

TWO_PI = 2.0 * math.pi


class ContourPreconditionError(ValueError):
    """The contour fails a structural precondition (undefined region,
    annulus violation, degenerate angles); distinct from a clean False of
    the extremality predicate."""


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class OuterContour:
    """Angle-ordered contour points with their annulus parameters."""

    points: np.ndarray
    radius: float
    eps: float

    @classmethod
    def from_points(cls, points, radius: float, eps: float) -> "OuterContour":
        pts = _sorted_by_angle(np.asarray(points, dtype=float))
        _validate_annulus(pts, radius, eps)
        return cls(points=pts, radius=radius, eps=eps)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def angles(self) -> np.ndarray:
        return np.mod(np.arctan2(self.points[:, 1], self.points[:, 0]), TWO_PI)

    @property
    def radii(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])


@dataclass(frozen=True)
class Functionals:
    """Discrete boundary functionals of a contour at reference radius r_c.

    theta are the cyclic angular gaps, rho the radial offsets from r_c - 2.
    y1..y6 are the standard quadratic-order sums: cubed gaps, squared slopes,
    squared heights, heights, and the two first-harmonic projections.
    """

    n: int
    angles: np.ndarray
    radii: np.ndarray
    thetas: np.ndarray
    rhos: np.ndarray
    y1: float
    y2: float
    y3: float
    y4: float
    y5: float
    y6: float
    max_abs_rho: float
    max_theta: float

    @property
    def y_tuple(self) -> tuple:
        return (self.y1, self.y2, self.y3, self.y4, self.y5, self.y6)


@dataclass(frozen=True)
class ContourStatus:
    """Non-raising structural report used by membership estimators."""

    n: int
    well_defined: bool  # consecutive discs intersect (region S exists)
    all_triplets_extremal: bool
    member: bool  # well-defined and extremal; n <= 2 by convention
    annulus_points_ok: bool
    annulus_corners_ok: bool
    failure_reason: str


@dataclass(frozen=True)
class ExpansionReport:
    kappa: float
    functionals: Functionals
    area: float
    eroded_area: float
    volume_excess_exact: float
    volume_excess_quadratic: float
    volume_residual: float
    delta_exact: float
    delta_quadratic: float
    delta_residual: float
    eps_scale: float
    eps_warning: bool


# ---------------------------------------------------------------------------
# ordering and validation helpers


def _sorted_by_angle(pts: np.ndarray) -> np.ndarray:
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
    ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)
    order = np.argsort(ang, kind="stable")
    sorted_ang = ang[order]
    if len(pts) > 1 and np.any(np.diff(sorted_ang) < 1e-14):
        raise ContourPreconditionError("two contour points share a polar angle")
    return pts[order]


def _validate_annulus(pts: np.ndarray, radius: float, eps: float) -> None:
    if not (eps > 0):
        raise ContourPreconditionError(f"eps must be positive, got {eps}")
    if eps >= 1.0 or radius <= 2.0 + eps / (1.0 - eps):
        raise ContourPreconditionError(
            f"radius {radius} too small for eps {eps}: need radius > 2 + eps/(1-eps)"
        )
    r = np.hypot(pts[:, 0], pts[:, 1])
    lo, hi = radius - 2.0 - eps, radius - 2.0 + eps
    if np.any(r < lo - 1e-12) or np.any(r > hi + 1e-12):
        raise ContourPreconditionError(
            "contour radii leave the annulus "
            f"[{lo:.6g}, {hi:.6g}]: range [{r.min():.6g}, {r.max():.6g}]"
        )


def designated_intersection(zi, zj):
    """The outward intersection point of the two radius-2 circles:
    maximal norm, ties broken by minimal polar angle. None if the circles
    do not intersect transversally."""
    pts, _ = tg.circle_pair_intersections(
        (zi[0], zi[1]), DISC_RADIUS, (zj[0], zj[1]), DISC_RADIUS
    )
    if not pts:
        return None
    norms = [math.hypot(p[0], p[1]) for p in pts]
    if abs(norms[0] - norms[1]) > 1e-12:
        best = pts[0] if norms[0] > norms[1] else pts[1]
    else:
        angs = [math.atan2(p[1], p[0]) % TWO_PI for p in pts]
        best = pts[0] if angs[0] <= angs[1] else pts[1]
    return np.array(best)


# ---------------------------------------------------------------------------
# extremality and locality


def triplet_is_extremal(z_prev, z_mid, z_next, radius: float, eps: float) -> bool:
    """Angular extremality criterion for a consecutive triplet.

    The middle point's disc contributes boundary iff the corner it shares
    with its predecessor sits at a strictly smaller polar angle than the
    corner it shares with its successor; a buried middle point inverts the
    two (they cross exactly when the middle circle touches the union of
    the outer two). Angles are compared in the (-pi, pi] window centred at
    the middle point's own angle, so corners that drift past either
    neighbour keep their natural order. Touching counts as buried.

    Raises ContourPreconditionError when the corners do not exist or leave
    the annulus where the criterion is valid.
    """
    if eps >= 1.0 or radius <= 2.0 + eps / (1.0 - eps):
        raise ContourPreconditionError(
            f"criterion needs radius > 2 + eps/(1-eps); got radius={radius}, eps={eps}"
        )
    v_a = designated_intersection(z_prev, z_mid)
    v_b = designated_intersection(z_mid, z_next)
    if v_a is None or v_b is None:
        raise ContourPreconditionError("consecutive discs do not intersect")
    for v in (v_a, v_b):
        nv = math.hypot(v[0], v[1])
        if not (radius - eps - 1e-12 <= nv <= radius + eps + 1e-12):
            raise ContourPreconditionError(
                f"designated corner at radius {nv:.6g} outside the annulus "
                f"[{radius - eps:.6g}, {radius + eps:.6g}]"
            )
    t_mid = math.atan2(z_mid[1], z_mid[0])
    a = _wrap_pm_pi(math.atan2(v_a[1], v_a[0]) - t_mid)
    b = _wrap_pm_pi(math.atan2(v_b[1], v_b[0]) - t_mid)
    return a < b


def _wrap_pm_pi(angle: float) -> float:
    """Map an angle difference into (-pi, pi]."""
    a = angle % TWO_PI
    return a - TWO_PI if a > math.pi else a


def triplet_extremal_region_check(
    z_prev, z_mid, z_next, radius: float, eps: float
) -> bool:
    """Definitional extremality: the middle disc owns material outside the
    shrunk disc of radius R - eps that neither neighbour disc covers.

    Exact up to tangency tolerances: the region, if nonempty, either meets
    the middle circle (checked by arc classification) or has a vertex on a
    pair of the other bounding circles (checked on candidate vertices).
    """
    r = DISC_RADIUS
    zj = (float(z_mid[0]), float(z_mid[1]))
    others = [
        ((float(z_prev[0]), float(z_prev[1])), r),
        ((float(z_next[0]), float(z_next[1])), r),
        ((0.0, 0.0), radius - eps),
    ]

    def qualifies(x, y) -> bool:
        if math.hypot(x - zj[0], y - zj[1]) > r + 1e-12:
            return False
        if math.hypot(x, y) < radius - eps - 1e-12:
            return False
        for (c, rc) in others[:2]:
            if math.hypot(x - c[0], y - c[1]) < rc - 1e-12:
                return False
        return True

    # Arcs of the middle circle.
    events = []
    for (c, rc) in others:
        pts, _ = tg.circle_pair_intersections(zj, r, c, rc)
        if pts:
            events.extend(
                math.atan2(p[1] - zj[1], p[0] - zj[0]) for p in pts
            )
    for (a, b) in tg._split_intervals(events):
        tm = 0.5 * (a + b)
        if qualifies(zj[0] + r * math.cos(tm), zj[1] + r * math.sin(tm)):
            return True
    # Vertex candidates among the other three circles.
    for i in range(3):
        for j in range(i + 1, 3):
            pts, _ = tg.circle_pair_intersections(
                others[i][0], others[i][1], others[j][0], others[j][1]
            )
            for p in pts:
                if math.hypot(p[0] - zj[0], p[1] - zj[1]) <= r - 1e-9:
                    if qualifies(p[0], p[1]):
                        return True
    return False


def contour_status(points, radius: float, eps: float) -> ContourStatus:
    """Structural membership report; never raises on geometric failure."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n <= 2:
        ann_ok = bool(
            np.all(
                np.abs(np.hypot(pts[:, 0], pts[:, 1]) - (radius - 2.0)) <= eps + 1e-12
            )
        ) if n else True
        well = True
        if n == 2 and math.hypot(*(pts[0] - pts[1])) >= 2 * DISC_RADIUS:
            well = False
        return ContourStatus(
            n=n,
            well_defined=well,
            all_triplets_extremal=True,
            member=well,
            annulus_points_ok=ann_ok,
            annulus_corners_ok=True,
            failure_reason="" if well else "discs disjoint",
        )
    try:
        pts = _sorted_by_angle(pts)
    except ContourPreconditionError as e:
        return ContourStatus(n, False, False, False, False, False, str(e))
    r_arr = np.hypot(pts[:, 0], pts[:, 1])
    ann_pts = bool(np.all(np.abs(r_arr - (radius - 2.0)) <= eps + 1e-12))
    corners_ok = True
    well = True
    reason = ""
    for i in range(n):
        v = designated_intersection(pts[i], pts[(i + 1) % n])
        if v is None:
            well = False
            reason = f"discs {i} and {(i + 1) % n} do not intersect"
            break
        nv = math.hypot(v[0], v[1])
        if not (radius - eps - 1e-12 <= nv <= radius + eps + 1e-12):
            corners_ok = False
    if not well:
        return ContourStatus(n, False, False, False, ann_pts, False, reason)
    extremal = True
    for i in range(n):
        v_a = designated_intersection(pts[(i - 1) % n], pts[i])
        v_b = designated_intersection(pts[i], pts[(i + 1) % n])
        t_mid = math.atan2(pts[i][1], pts[i][0])
        a = _wrap_pm_pi(math.atan2(v_a[1], v_a[0]) - t_mid)
        b = _wrap_pm_pi(math.atan2(v_b[1], v_b[0]) - t_mid)
        if not (a < b):
            extremal = False
            reason = f"point {i} buried by its neighbours"
            break
    return ContourStatus(
        n=n,
        well_defined=True,
        all_triplets_extremal=extremal,
        member=extremal,
        annulus_points_ok=ann_pts,
        annulus_corners_ok=corners_ok,
        failure_reason=reason,
    )


def is_outer_contour(points, radius: float, eps: float) -> bool:
    """Locality check: every consecutive cyclic triplet extremal.

    Enforces the structural preconditions (annulus containment of points
    and corners, intersecting consecutive discs, radius > 2 + eps/(1-eps))
    by raising ContourPreconditionError; returns the bare extremality
    verdict otherwise.
    """
    pts = _sorted_by_angle(np.asarray(points, dtype=float))
    _validate_annulus(pts, radius, eps)
    n = len(pts)
    if n <= 2:
        return True
    for i in range(n):
        if not triplet_is_extremal(
            pts[(i - 1) % n], pts[i], pts[(i + 1) % n], radius, eps
        ):
            return False
    return True


@dataclass(frozen=True)
class ExtractionResult:
    contour: OuterContour
    extremal_mask: np.ndarray  # aligned with contour.points
    all_extremal: bool


def extract_boundary_points(
    halo_obj, radius: float, eps: float, centre=(0.0, 0.0)
) -> ExtractionResult:
    """Identify which configuration points contribute arcs to the outermost
    boundary loop of the halo, returning them angle-ordered about centre."""
    if not halo_obj.fits_fundamental_domain or not halo_obj.loops:
        raise tg.GeometryError("extraction needs planar boundary loops")
    outer = max(halo_obj.loops, key=lambda lp: lp.signed_area)
    if outer.signed_area <= 0:
        raise tg.GeometryError("no positive outer loop")
    contributing = set()
    for a in outer.arcs:
        contributing.add((round(a.centre[0], 9), round(a.centre[1], 9)))
    pts = halo_obj.lifted_points - np.asarray(centre, dtype=float)
    ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)
    order = np.argsort(ang, kind="stable")
    sorted_pts = pts[order]
    mask = np.array(
        [
            (round(p[0] + centre[0], 9), round(p[1] + centre[1], 9)) in contributing
            for p in sorted_pts
        ]
    )
    contour = OuterContour(points=sorted_pts, radius=radius, eps=eps)
    return ExtractionResult(
        contour=contour, extremal_mask=mask, all_extremal=bool(mask.all())
    )


# ---------------------------------------------------------------------------
# functionals


def functionals(points, kappa: float) -> Functionals:
    """The y-sums of a contour relative to the critical radius for kappa."""
    d = derived_constants(kappa)
    pts = _sorted_by_angle(np.asarray(points, dtype=float))
    n = len(pts)
    if n == 0:
        raise ValueError("empty contour")
    t = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)
    r = np.hypot(pts[:, 0], pts[:, 1])
    theta = np.diff(t, append=t[0] + TWO_PI)
    rho = r - (d.r_c - 2.0)
    rho_next = np.roll(rho, -1)
    t_next_val = np.roll(t, -1)
    rho_bar = 0.5 * (rho + rho_next)
    y1 = float(np.sum(theta ** 3))
    y2 = float(np.sum((rho_next - rho) ** 2 / theta))
    y3 = float(np.sum(rho_bar ** 2 * theta))
    y4 = float(np.sum(rho_bar * theta))
    cos_bar = 0.5 * (rho * np.cos(t) + rho_next * np.cos(t_next_val))
    sin_bar = 0.5 * (rho * np.sin(t) + rho_next * np.sin(t_next_val))
    y5 = float(np.sum(theta * cos_bar))
    y6 = float(np.sum(theta * sin_bar))
    return Functionals(
        n=n,
        angles=t,
        radii=r,
        thetas=theta,
        rhos=rho,
        y1=y1,
        y2=y2,
        y3=y3,
        y4=y4,
        y5=y5,
        y6=y6,
        max_abs_rho=float(np.max(np.abs(rho))),
        max_theta=float(np.max(theta)),
    )


# ---------------------------------------------------------------------------
# exact areas and expansions


def surface_volume_exact(points) -> tuple[float, float]:
    """Exact (|S|, |S^-|) of a contour via triangles plus segment terms.

    |S| sums, per consecutive pair, the origin triangle, the corner
    triangle correction 2*sin(phi), and 2*(phi + theta), where phi is the
    central angle of the corner circle chord (chord length u = 4 sin(phi/2));
    the angular terms add up exactly because the corner turning angles sum
    to the full turn. |S^-| is the chord polygon minus circular segments.
    Valid for contours with at least 3 points whose consecutive discs
    intersect; a single point gives (4*pi, 0) by the same formula.
    """
    pts = _sorted_by_angle(np.asarray(points, dtype=float))
    n = len(pts)
    if n == 2:
        raise ContourPreconditionError(
            "two-point configurations have no scalloped region; the eroded "
            "closed form needs n >= 3 (or n == 1)"
        )
    t = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)
    r = np.hypot(pts[:, 0], pts[:, 1])
    theta = np.diff(t, append=t[0] + TWO_PI) if n > 1 else np.array([TWO_PI])
    nxt = np.roll(np.arange(n), -1)
    u = np.hypot(pts[nxt, 0] - pts[:, 0], pts[nxt, 1] - pts[:, 1])
    if np.any(u >= 2 * DISC_RADIUS):
        raise ContourPreconditionError("consecutive discs do not intersect")
    phi = 2.0 * np.arcsin(np.clip(u / (2 * DISC_RADIUS), 0.0, 1.0))
    tri = 0.5 * r * r[nxt] * np.sin(theta)
    area = float(np.sum(tri + 2.0 * np.sin(phi) + 2.0 * (phi + theta)))
    eroded = float(np.sum(tri - 2.0 * (phi - np.sin(phi))))
    return area, eroded


def delta_exact(points, kappa: float) -> float:
    """Exact droplet cost relative to the critical round droplet:
    (|S| - kappa |S^-|) minus its value for the perfect disc."""
    d = derived_constants(kappa)
    area, eroded = surface_volume_exact(points)
    ref = math.pi * d.r_c ** 2 - kappa * math.pi * (d.r_c - 2.0) ** 2
    return (area - kappa * eroded) - ref


def delta_and_volume_expansion(points, kappa: float) -> ExpansionReport:
    """Exact excesses and their second-order y-sum expansions.

    Quadratic forms use the bare coefficients (c1, c2, c3, 1/2); the exact
    minus quadratic residuals are one order smaller in the contour scale.
    Emits a warning when the radial scale exceeds 0.2, where the expansion
    degrades.
    """
    d = derived_constants(kappa)
    f = functionals(points, kappa)
    area, eroded = surface_volume_exact(points)
    vol_exact = area - math.pi * d.r_c ** 2
    vol_quad = -d.c1 * f.y1 + d.c3 * f.y2 + 0.5 * f.y3 + d.c2 * f.y4
    ref = math.pi * d.r_c ** 2 - kappa * math.pi * (d.r_c - 2.0) ** 2
    dl_exact = (area - kappa * eroded) - ref
    dl_quad = d.c1 * f.y1 + d.c3 * f.y2 - d.c3 * f.y3
    eps_scale = f.max_abs_rho
    warned = False
    if eps_scale > 0.2:
        warned = True
        warnings.warn(
            f"contour radial scale {eps_scale:.3g} exceeds 0.2; the "
            "second-order expansion is unreliable",
            stacklevel=2,
        )
    return ExpansionReport(
        kappa=kappa,
        functionals=f,
        area=area,
        eroded_area=eroded,
        volume_excess_exact=vol_exact,
        volume_excess_quadratic=vol_quad,
        volume_residual=vol_exact - vol_quad,
        delta_exact=dl_exact,
        delta_quadratic=dl_quad,
        delta_residual=dl_exact - dl_quad,
        eps_scale=eps_scale,
        eps_warning=warned,
    )


def geometric_centre(points) -> np.ndarray:
    """Perimeter-weighted centre of the chord polygon: sum of edge midpoints
    weighted by edge lengths, normalised by the perimeter."""
    pts = _sorted_by_angle(np.asarray(points, dtype=float))
    n = len(pts)
    if n < 2:
        return pts.reshape(-1)[:2].astype(float) if n else np.zeros(2)
    nxt = np.roll(np.arange(n), -1)
    u = np.hypot(pts[nxt, 0] - pts[:, 0], pts[nxt, 1] - pts[:, 1])
    mid = 0.5 * (pts + pts[nxt])
    total = float(np.sum(u))
    if total == 0.0:
        raise ValueError("degenerate contour: zero perimeter")
    return (mid * u[:, None]).sum(axis=0) / total


# ---------------------------------------------------------------------------
# generators


def noisy_polygon_contour(
    kappa: float,
    eps: float,
    rng: np.random.Generator,
    n: int | None = None,
    modes: int = 4,
    max_tries: int = 200,
) -> np.ndarray:
    """Jittered regular polygon with a smooth low-order radial field.

    Angles are an n-gon with 30% gap jitter; the radial offset is a random
    Fourier mix rescaled so its maximum equals 0.7 * eps. The corner of a
    point pair at base radius a and gap theta sags below the outer radius
    by about a * R * theta^2 / 16, so the default n keeps the sag within
    the remaining 0.3 * eps annulus margin. Draws are rejected until the
    locality predicate accepts (rejection is rare by construction; a
    RuntimeError after max_tries signals mis-tuning).
    """
    d = derived_constants(kappa)
    base = d.r_c - 2.0
    if n is None:
        gap = 0.42 * math.sqrt(eps * 8.0 / (base * d.r_c))
        n = max(8, int(math.ceil(TWO_PI / gap)))
    for _ in range(max_tries):
        t = (TWO_PI * (np.arange(n) + 0.3 * rng.uniform(-1, 1, n)) / n) % TWO_PI
        t.sort()
        if np.any(np.diff(t) < 1e-6) or (t[0] + TWO_PI - t[-1]) < 1e-6:
            continue
        coef = rng.standard_normal((2, modes))
        ks = np.arange(1, modes + 1)
        field = coef[0] @ np.cos(np.outer(ks, t)) + coef[1] @ np.sin(np.outer(ks, t))
        peak = np.max(np.abs(field))
        if peak == 0.0:
            continue
        rho = 0.7 * eps * field / peak
        pts = np.c_[(base + rho) * np.cos(t), (base + rho) * np.sin(t)]
        try:
            if is_outer_contour(pts, d.r_c, eps):
                return pts
        except ContourPreconditionError:
            continue
    raise RuntimeError("contour generator kept rejecting; tuning is off")


def bridge_contour(
    kappa: float,
    beta: float,
    rng: np.random.Generator,
    m: float = 0.0,
    modes: int = 64,
    max_tries: int = 200,
) -> np.ndarray:
    """Contour with Brownian-bridge radial field at inverse temperature beta.

    Angles are a Poisson sample of the droplet intensity g * beta^(1/3);
    the radial offsets are (m + B(t)) / sqrt((kappa-1) beta) with B a
    mean-centred periodic bridge synthesised from its first `modes`
    Fourier modes.

    Only structural degeneracies are rejected (fewer than 3 points,
    coincident angles, consecutive discs failing to intersect). No attempt
    is made to condition on every point being extremal: bridge fluctuations
    exceed the burial threshold at each point with probability of order
    one, so that event is exponentially rare in the number of points and
    belongs to the membership estimators, not to the generator.
    """
    d = derived_constants(kappa)
    base = d.r_c - 2.0
    lam = d.intensity(beta)
    scale = 1.0 / math.sqrt((kappa - 1.0) * beta)
    for _ in range(max_tries):
        n = rng.poisson(TWO_PI * lam)
        if n < 3:
            continue
        t = np.sort(rng.uniform(0.0, TWO_PI, n))
        if np.any(np.diff(t) < 1e-9):
            continue
        ks = np.arange(1, modes + 1)
        amp = rng.standard_normal((2, modes)) / ks
        field = (
            amp[0] @ np.cos(np.outer(ks, t)) + amp[1] @ np.sin(np.outer(ks, t))
        ) / math.sqrt(math.pi)
        rho = (m + field) * scale
        pts = np.c_[(base + rho) * np.cos(t), (base + rho) * np.sin(t)]
        if contour_status(pts, d.r_c, eps=0.5).well_defined:
            return pts
    raise RuntimeError("bridge contour generator kept rejecting; tuning is off")
