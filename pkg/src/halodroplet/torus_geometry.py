"""Exact halo geometry on a flat square torus.

The halo of a finite point configuration is the union of closed radius-2
discs centred at its points. Everything here is computed from the exact
circle arrangement: boundaries are decomposed into circular arcs, areas come
from Green's theorem along those arcs, and topological counts come from the
chained boundary loops. No polygonal approximation is used anywhere.

Torus handling: configurations live in the window [-side/2, side/2)^2.
Overlapping discs are clustered; each cluster is unwrapped to the plane by
breadth-first lifting of minimal-image displacements. A cluster whose lift
is inconsistent (it meets its own periodic copy) wraps around the torus; its
area is still exact, via a window-clipped Green computation over replicated
circles, but it carries no planar boundary decomposition and the halo is
flagged as not fitting a fundamental domain.

The erosion interior is the set of points whose full radius-2 disc stays
inside the halo. Its boundary lies on radius-2 circles centred at the
corners of the halo boundary (plus isolated configuration points), which is
what makes an exact arrangement computation possible here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from halodroplet.model_constants import DISC_RADIUS, SINGLE_DISC_AREA

TANGENCY_TOL = 1e-12
CHAIN_TOL = 1e-9
TWO_PI = 2.0 * math.pi


class GeometryError(RuntimeError):
    """Arrangement invariant broke (open chain, degenerate input)."""


# ---------------------------------------------------------------------------
# basic types


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


class Configuration:
    """Point configuration on the torus of the given side.

    Coordinates are wrapped into [-side/2, side/2). Exact duplicate points
    (within 1e-12) are rejected: duplicated circles make the boundary
    arrangement ill-posed.
    """

    def __init__(self, points, side: float):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
        if not (side > 4.0):
            raise ValueError(f"torus side must exceed 4, got {side}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        half = side / 2.0
        pts = (pts + half) % side - half
        self.points = pts
        self.side = float(side)
        self._check_duplicates()

    def _check_duplicates(self) -> None:
        n = len(self.points)
        for i in range(n):
            for j in range(i + 1, n):
                if torus_distance(self.points[i], self.points[j], self.side) < 1e-12:
                    raise ValueError(f"points {i} and {j} coincide")

    @property
    def n(self) -> int:
        return len(self.points)

    @classmethod
    def from_torus_points(cls, tps, side: float) -> "Configuration":
        return cls([tp.as_tuple() for tp in tps], side)


def wrap_displacement(delta, side: float):
    """Minimal-image displacement, coordinates in [-side/2, side/2)."""
    d = np.asarray(delta, dtype=float)
    half = side / 2.0
    return (d + half) % side - half


def torus_distance(p, q, side: float) -> float:
    """Distance on the torus: minimum over the 3x3 block of lattice images."""
    d = wrap_displacement(np.asarray(p, dtype=float) - np.asarray(q, dtype=float), side)
    return float(np.hypot(d[..., 0], d[..., 1]))


def torus_distance_matrix(points: np.ndarray, side: float) -> np.ndarray:
    d = points[:, None, :] - points[None, :, :]
    d = wrap_displacement(d, side)
    return np.hypot(d[..., 0], d[..., 1])


# ---------------------------------------------------------------------------
# arcs, Green's theorem, chaining


@dataclass(frozen=True)
class ArcSegment:
    """Directed circular arc from angle t0 to t1 (t1 < t0 means clockwise)."""

    centre: tuple[float, float]
    radius: float
    t0: float
    t1: float

    def point_at(self, t: float) -> tuple[float, float]:
        return (
            self.centre[0] + self.radius * math.cos(t),
            self.centre[1] + self.radius * math.sin(t),
        )

    @property
    def start(self) -> tuple[float, float]:
        return self.point_at(self.t0)

    @property
    def end(self) -> tuple[float, float]:
        return self.point_at(self.t1)

    @property
    def length(self) -> float:
        return self.radius * abs(self.t1 - self.t0)

    @property
    def green_area(self) -> float:
        # (1/2) integral of (x dy - y dx) along the directed arc.
        cx, cy = self.centre
        r, a, b = self.radius, self.t0, self.t1
        return 0.5 * (
            r * r * (b - a)
            + r * cx * (math.sin(b) - math.sin(a))
            + r * cy * (math.cos(a) - math.cos(b))
        )

    @property
    def angle_interval(self) -> tuple[float, float]:
        """(lo, width) of the angular set covered, ignoring direction."""
        lo, hi = (self.t0, self.t1) if self.t1 >= self.t0 else (self.t1, self.t0)
        return (lo, hi - lo)


@dataclass
class Loop:
    """Closed boundary chain; positive signed area means region to the left
    encloses it counter-clockwise (an outer boundary), negative means a hole."""

    arcs: list
    signed_area: float
    length: float

    @property
    def vertices(self) -> list:
        return [a.start for a in self.arcs]

    def winding_about(self, centre) -> int:
        cx, cy = centre
        total = 0.0
        for a in self.arcs:
            prev = None
            # Sample the angular sweep of the arc about `centre` finely
            # enough to track branch crossings of atan2.
            steps = max(2, int(abs(a.t1 - a.t0) / 0.5) + 2)
            for k in range(steps + 1):
                t = a.t0 + (a.t1 - a.t0) * k / steps
                x, y = a.point_at(t)
                ang = math.atan2(y - cy, x - cx)
                if prev is not None:
                    d = ang - prev
                    while d > math.pi:
                        d -= TWO_PI
                    while d < -math.pi:
                        d += TWO_PI
                    total += d
                prev = ang
        return int(round(total / TWO_PI))


def _segment_green(p, q) -> float:
    return 0.5 * (p[0] * q[1] - p[1] * q[0])


def circle_pair_intersections(c0, r0, c1, r1):
    """Intersection points of two circles; [] if disjoint or nested.

    Near-tangent pairs (gap within TANGENCY_TOL) are reported as empty with
    the tangency flag; callers surface that as a warning.
    """
    dx = c1[0] - c0[0]
    dy = c1[1] - c0[1]
    d = math.hypot(dx, dy)
    tangent = abs(d - (r0 + r1)) < TANGENCY_TOL or abs(d - abs(r0 - r1)) < TANGENCY_TOL
    if d >= r0 + r1 - TANGENCY_TOL or d <= abs(r0 - r1) + TANGENCY_TOL or d == 0.0:
        return [], tangent
    a = (d * d + r0 * r0 - r1 * r1) / (2.0 * d)
    h_sq = r0 * r0 - a * a
    h = math.sqrt(max(h_sq, 0.0))
    ux, uy = dx / d, dy / d
    bx, by = c0[0] + a * ux, c0[1] + a * uy
    return [(bx - h * uy, by + h * ux), (bx + h * uy, by - h * ux)], tangent


def _angles_on_circle(centre, pts) -> list:
    return [math.atan2(p[1] - centre[1], p[0] - centre[0]) for p in pts]


def _split_intervals(angles):
    """Sorted split angles -> list of (a, b) ccw sub-intervals covering the circle."""
    if not angles:
        return [(-math.pi, math.pi)]
    s = sorted(set(angles))
    out = []
    for i in range(len(s)):
        a = s[i]
        b = s[i + 1] if i + 1 < len(s) else s[0] + TWO_PI
        if b - a > 1e-14:
            out.append((a, b))
    return out


def chain_arcs(arcs) -> list:
    """Chain directed arcs into closed loops by endpoint matching.

    Every arc's end must match exactly one other arc's start within
    CHAIN_TOL; otherwise the arrangement is inconsistent and a
    GeometryError is raised.
    """
    if not arcs:
        return []
    starts = np.array([a.start for a in arcs])
    used = [False] * len(arcs)
    loops = []
    for seed in range(len(arcs)):
        if used[seed]:
            continue
        chain = [arcs[seed]]
        used[seed] = True
        cur = arcs[seed]
        closed = False
        for _ in range(len(arcs) + 1):
            e = cur.end
            d = np.hypot(starts[:, 0] - e[0], starts[:, 1] - e[1])
            d[np.array(used)] = np.inf
            # Allow closing back onto the seed.
            seed_start = arcs[seed].start
            d_seed = math.hypot(seed_start[0] - e[0], seed_start[1] - e[1])
            if d_seed < CHAIN_TOL and (len(chain) > 1 or d.min() >= CHAIN_TOL):
                closed = True
                break
            j = int(np.argmin(d))
            if d[j] >= CHAIN_TOL:
                if d_seed < CHAIN_TOL:
                    closed = True
                    break
                raise GeometryError(
                    f"open boundary chain: no continuation within {CHAIN_TOL}"
                )
            chain.append(arcs[j])
            used[j] = True
            cur = arcs[j]
        if not closed:
            raise GeometryError("boundary chain failed to close")
        area = sum(a.green_area for a in chain)
        length = sum(a.length for a in chain)
        loops.append(Loop(arcs=chain, signed_area=area, length=length))
    return loops


def _point_in_loops(x, y, loops) -> bool:
    """Ray-cast parity over arc loops; jitters the ray to dodge grazing hits."""
    for attempt in range(8):
        yr = y + attempt * 3.7e-10
        crossings = 0
        ok = True
        for loop in loops:
            for a in loop.arcs:
                cx, cy = a.centre
                r = a.radius
                dy = yr - cy
                if abs(dy) >= r:
                    if abs(abs(dy) - r) < 1e-11:
                        ok = False
                        break
                    continue
                h = math.sqrt(r * r - dy * dy)
                lo, width = a.angle_interval
                for xc in (cx - h, cx + h):
                    if abs(xc - x) < 1e-11:
                        ok = False
                        break
                    if xc <= x:
                        continue
                    ang = math.atan2(dy, xc - cx)
                    if ((ang - lo) % TWO_PI) <= width + 1e-13:
                        crossings += 1
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return crossings % 2 == 1
    raise GeometryError("point-in-region ray cast kept grazing an arc")


# ---------------------------------------------------------------------------
# planar disc-union arrangement


def _disc_union_loops(centres) -> tuple[list, bool]:
    """Boundary loops of a planar union of radius-2 discs, ccw outer / cw holes.

    Returns (loops, tangency_seen). Arc retention: a candidate sub-arc
    belongs to the union boundary iff its midpoint is not strictly inside
    any other disc.
    """
    r = DISC_RADIUS
    n = len(centres)
    events = [[] for _ in range(n)]
    tangency = False
    for i in range(n):
        for j in range(i + 1, n):
            pts, tang = circle_pair_intersections(centres[i], r, centres[j], r)
            tangency = tangency or tang
            if pts:
                events[i].extend(_angles_on_circle(centres[i], pts))
                events[j].extend(_angles_on_circle(centres[j], pts))
    arcs = []
    full_circles = []
    for i in range(n):
        ci = centres[i]
        pieces = _split_intervals(events[i])
        if not events[i]:
            # Whole circle survives unless the disc sits inside another one.
            probe = (ci[0] + r, ci[1])
            if not _strictly_inside_any(probe, centres, r, skip=i):
                full_circles.append(
                    Loop(
                        arcs=[ArcSegment((ci[0], ci[1]), r, -math.pi, math.pi)],
                        signed_area=math.pi * r * r,
                        length=TWO_PI * r,
                    )
                )
            continue
        for (a, b) in pieces:
            tm = 0.5 * (a + b)
            mid = (ci[0] + r * math.cos(tm), ci[1] + r * math.sin(tm))
            if not _strictly_inside_any(mid, centres, r, skip=i):
                arcs.append(ArcSegment((ci[0], ci[1]), r, a, b))
    loops = chain_arcs(arcs)
    loops.extend(full_circles)
    return loops, tangency


def _strictly_inside_any(p, centres, r, skip=-1) -> bool:
    for k, c in enumerate(centres):
        if k == skip:
            continue
        if math.hypot(p[0] - c[0], p[1] - c[1]) < r - TANGENCY_TOL:
            return True
    return False


# ---------------------------------------------------------------------------
# torus clustering and unwrapping


def _cluster_and_lift(config: Configuration):
    """Cluster overlapping discs and lift each cluster to the plane.

    Returns (labels, lifted, wrapped_labels, tangency): labels[i] is the
    cluster id of point i, lifted[i] its planar lift (anchored at the
    cluster's first point), wrapped_labels the set of cluster ids whose
    lift is inconsistent (the cluster wraps around the torus).
    """
    pts = config.points
    n = config.n
    side = config.side
    labels = -np.ones(n, dtype=int)
    lifted = pts.copy()
    wrapped = set()
    tangency = False
    dmat = torus_distance_matrix(pts, side) if n else np.zeros((0, 0))
    overlap_cut = 2.0 * DISC_RADIUS
    next_label = 0
    for root in range(n):
        if labels[root] >= 0:
            continue
        labels[root] = next_label
        lifted[root] = pts[root]
        queue = [root]
        while queue:
            i = queue.pop()
            for j in range(n):
                if j == i:
                    continue
                d = dmat[i, j]
                if abs(d - overlap_cut) < TANGENCY_TOL:
                    tangency = True
                if d >= overlap_cut - TANGENCY_TOL:
                    continue
                step = wrap_displacement(pts[j] - pts[i], side)
                cand = lifted[i] + step
                if labels[j] < 0:
                    labels[j] = next_label
                    lifted[j] = cand
                    queue.append(j)
                elif labels[j] == next_label:
                    if np.hypot(*(cand - lifted[j])) > CHAIN_TOL:
                        wrapped.add(next_label)
        # A lifted cluster may still touch its own periodic copy without an
        # edge inconsistency only if two lifts end up >= side apart in some
        # coordinate; then discs from distinct copies come within 4.
        if next_label not in wrapped:
            members = np.where(labels == next_label)[0]
            lp = lifted[members]
            span = lp.max(axis=0) - lp.min(axis=0)
            if span[0] > side - overlap_cut or span[1] > side - overlap_cut:
                for a_i in range(len(members)):
                    for b_i in range(a_i + 1, len(members)):
                        delta = lp[a_i] - lp[b_i]
                        for kx in (-1, 0, 1):
                            for ky in (-1, 0, 1):
                                if kx == 0 and ky == 0:
                                    continue
                                im = math.hypot(
                                    delta[0] - kx * side, delta[1] - ky * side
                                )
                                if im < overlap_cut - TANGENCY_TOL:
                                    wrapped.add(next_label)
        next_label += 1
    return labels, lifted, wrapped, tangency


# ---------------------------------------------------------------------------
# clipped-window area (used when the halo wraps the torus)


def clipped_union_area(config: Configuration) -> float:
    """Exact area of the halo inside one fundamental window.

    Replicates discs over the 3x3 lattice block, keeps those meeting the
    window, and integrates Green's theorem along (boundary arcs of the
    union inside the window) + (window-edge segments inside the union).
    Valid whether or not the halo wraps.
    """
    side = config.side
    half = side / 2.0
    r = DISC_RADIUS
    copies = []
    for p in config.points:
        for kx in (-1, 0, 1):
            for ky in (-1, 0, 1):
                q = (p[0] + kx * side, p[1] + ky * side)
                if (
                    -half - r <= q[0] <= half + r
                    and -half - r <= q[1] <= half + r
                ):
                    copies.append(q)
    if not copies:
        return 0.0

    m = len(copies)
    events = [[] for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            pts, _ = circle_pair_intersections(copies[i], r, copies[j], r)
            if pts:
                events[i].extend(_angles_on_circle(copies[i], pts))
                events[j].extend(_angles_on_circle(copies[j], pts))
    # Window edge crossings on each circle.
    for i, c in enumerate(copies):
        for axis, sign in ((0, 1.0), (1, 1.0), (0, -1.0), (1, -1.0)):
            coord = sign * half
            dist = coord - c[axis]
            if abs(dist) < r - 1e-15:
                h = math.sqrt(r * r - dist * dist)
                if axis == 0:
                    pts = [(coord, c[1] - h), (coord, c[1] + h)]
                else:
                    pts = [(c[0] - h, coord), (c[0] + h, coord)]
                keep = [
                    p
                    for p in pts
                    if -half - 1e-12 <= p[0] <= half + 1e-12
                    and -half - 1e-12 <= p[1] <= half + 1e-12
                ]
                events[i].extend(_angles_on_circle(c, keep))

    area = 0.0
    for i in range(m):
        ci = copies[i]
        if not events[i]:
            probe = (ci[0] + r, ci[1])
            if _strictly_inside_any(probe, copies, r, skip=i):
                continue
            if -half < probe[0] < half and -half < probe[1] < half:
                area += math.pi * r * r
            continue
        for (a, b) in _split_intervals(events[i]):
            tm = 0.5 * (a + b)
            mid = (ci[0] + r * math.cos(tm), ci[1] + r * math.sin(tm))
            if not (-half < mid[0] < half and -half < mid[1] < half):
                continue
            if _strictly_inside_any(mid, copies, r, skip=i):
                continue
            area += ArcSegment((ci[0], ci[1]), r, a, b).green_area

    # Window edges, ccw: corners in ccw order starting bottom-left.
    corners = [(-half, -half), (half, -half), (half, half), (-half, half)]
    for e in range(4):
        p0 = corners[e]
        p1 = corners[(e + 1) % 4]
        # Collect circle crossings lying on this edge.
        if p0[0] == p1[0]:
            axis, fixed = 1, p0[0]
        else:
            axis, fixed = 0, p0[1]
        hits = []
        for i, c in enumerate(copies):
            if axis == 1:
                dist = fixed - c[0]
            else:
                dist = fixed - c[1]
            if abs(dist) < r - 1e-15:
                h = math.sqrt(r * r - dist * dist)
                if axis == 1:
                    cand = [(fixed, c[1] - h), (fixed, c[1] + h)]
                else:
                    cand = [(c[0] - h, fixed), (c[0] + h, fixed)]
                hits.extend(cand)
        ts = [0.0, 1.0]
        span = (p1[0] - p0[0], p1[1] - p0[1])
        for hpt in hits:
            t = (
                (hpt[0] - p0[0]) / span[0]
                if axis == 0
                else (hpt[1] - p0[1]) / span[1]
            )
            if 1e-14 < t < 1.0 - 1e-14:
                ts.append(t)
        ts = sorted(set(ts))
        for k in range(len(ts) - 1):
            tm = 0.5 * (ts[k] + ts[k + 1])
            mid = (p0[0] + span[0] * tm, p0[1] + span[1] * tm)
            if _strictly_inside_any(mid, copies, r, skip=-1):
                a_pt = (p0[0] + span[0] * ts[k], p0[1] + span[1] * ts[k])
                b_pt = (p0[0] + span[0] * ts[k + 1], p0[1] + span[1] * ts[k + 1])
                area += _segment_green(a_pt, b_pt)
    return area


# ---------------------------------------------------------------------------
# the Halo object


@dataclass
class Halo:
    """Exact halo of a configuration: area, boundary decomposition, topology.

    loops cover every cluster that unwraps to the plane (coordinates are the
    cluster lifts). When some cluster wraps around the torus,
    fits_fundamental_domain is False, loops/topology are unavailable (None),
    and the area comes from the window-clipped route.
    """

    config: Configuration
    area: float
    loops: list
    n_components: int | None
    n_holes: int | None
    boundary_length: float | None
    fits_fundamental_domain: bool
    tangency_warning: bool
    lifted_points: np.ndarray
    cluster_labels: np.ndarray

    @property
    def euler_characteristic(self) -> int | None:
        if self.n_components is None or self.n_holes is None:
            return None
        return self.n_components - self.n_holes


def halo(config: Configuration) -> Halo:
    """Compute the exact halo of a configuration."""
    if config.n == 0:
        return Halo(
            config=config,
            area=0.0,
            loops=[],
            n_components=0,
            n_holes=0,
            boundary_length=0.0,
            fits_fundamental_domain=True,
            tangency_warning=False,
            lifted_points=config.points.copy(),
            cluster_labels=np.zeros(0, dtype=int),
        )
    labels, lifted, wrapped, tangency = _cluster_and_lift(config)
    if wrapped:
        area = clipped_union_area(config)
        return Halo(
            config=config,
            area=area,
            loops=[],
            n_components=None,
            n_holes=None,
            boundary_length=None,
            fits_fundamental_domain=False,
            tangency_warning=tangency,
            lifted_points=lifted,
            cluster_labels=labels,
        )
    loops = []
    tang2 = False
    for lbl in range(labels.max() + 1):
        centres = [tuple(p) for p in lifted[labels == lbl]]
        lps, tg = _disc_union_loops(centres)
        tang2 = tang2 or tg
        loops.extend(lps)
    area = sum(lp.signed_area for lp in loops)
    n_pos = sum(1 for lp in loops if lp.signed_area > 0)
    n_neg = sum(1 for lp in loops if lp.signed_area < 0)
    return Halo(
        config=config,
        area=area,
        loops=loops,
        n_components=n_pos,
        n_holes=n_neg,
        boundary_length=sum(lp.length for lp in loops),
        fits_fundamental_domain=True,
        tangency_warning=tangency or tang2,
        lifted_points=lifted,
        cluster_labels=labels,
    )


def lens_area(d: float, r: float = DISC_RADIUS) -> float:
    """Intersection area of two radius-r discs with centres d apart."""
    if d < 0:
        raise ValueError("distance must be nonnegative")
    if d >= 2.0 * r:
        return 0.0
    return 2.0 * r * r * math.acos(d / (2.0 * r)) - 0.5 * d * math.sqrt(
        4.0 * r * r - d * d
    )


def disc_area_minus_union(p, neighbours, r: float = DISC_RADIUS) -> float:
    """Exact |B_r(p) \\ union of B_r(q)| for planar p and neighbour list.

    Green's theorem over the boundary of the difference region: uncovered
    arcs of p's circle (ccw) plus, for each neighbour, the pieces of its
    circle that lie inside B_r(p) and outside the other neighbours
    (clockwise, since the region is outside the neighbour's disc).
    """
    neigh = [q for q in neighbours if math.hypot(q[0] - p[0], q[1] - p[1]) < 2 * r]
    if not neigh:
        return math.pi * r * r
    events_p = []
    events_n = [[] for _ in neigh]
    for k, q in enumerate(neigh):
        pts, _ = circle_pair_intersections(p, r, q, r)
        if pts:
            events_p.extend(_angles_on_circle(p, pts))
            events_n[k].extend(_angles_on_circle(q, pts))
    for k1 in range(len(neigh)):
        for k2 in range(k1 + 1, len(neigh)):
            pts, _ = circle_pair_intersections(neigh[k1], r, neigh[k2], r)
            if pts:
                events_n[k1].extend(_angles_on_circle(neigh[k1], pts))
                events_n[k2].extend(_angles_on_circle(neigh[k2], pts))
    area = 0.0
    covered_everything = True
    for (a, b) in _split_intervals(events_p):
        tm = 0.5 * (a + b)
        mid = (p[0] + r * math.cos(tm), p[1] + r * math.sin(tm))
        if not _strictly_inside_any(mid, neigh, r):
            area += ArcSegment((p[0], p[1]), r, a, b).green_area
            covered_everything = False
    for k, q in enumerate(neigh):
        for (a, b) in _split_intervals(events_n[k]):
            tm = 0.5 * (a + b)
            mid = (q[0] + r * math.cos(tm), q[1] + r * math.sin(tm))
            if math.hypot(mid[0] - p[0], mid[1] - p[1]) >= r - TANGENCY_TOL:
                continue
            others = [neigh[k2] for k2 in range(len(neigh)) if k2 != k]
            if _strictly_inside_any(mid, others, r):
                continue
            # Region lies outside this neighbour's disc: traverse clockwise.
            area += ArcSegment((q[0], q[1]), r, b, a).green_area
            covered_everything = False
    if covered_everything:
        return 0.0
    return area


# ---------------------------------------------------------------------------
# erosion interior


@dataclass
class ErosionInterior:
    """The set of points whose radius-2 disc stays inside the halo.

    Made of arc-bounded regions (loops) plus isolated points (every
    configuration point belongs to the interior; those not connected to a
    region stand alone). Euler characteristic counts isolated points as
    components.
    """

    loops: list
    isolated_points: list
    area: float
    boundary_length: float
    n_components: int
    n_holes: int
    euler_characteristic: int
    corners: list


def _boundary_arc_list(loops: list) -> list:
    """All boundary arcs as (centre, lo, width) angular sets."""
    out = []
    for lp in loops:
        for a in lp.arcs:
            lo, width = a.angle_interval
            out.append((a.centre, lo, width))
    return out


def _collect_corners(loops: list) -> list:
    corners = []
    for lp in loops:
        if len(lp.arcs) == 1 and abs(abs(lp.arcs[0].t1 - lp.arcs[0].t0) - TWO_PI) < 1e-12:
            continue  # full circle, no corners
        for a in lp.arcs:
            corners.append(a.start)
    return corners


def _erosion_membership(x, y, arcs, corners) -> bool:
    """True iff the point keeps its radius-2 disc inside the halo, given it
    lies in the halo: at least 2 from every boundary corner and radially at
    least 2 from every boundary arc."""
    r = DISC_RADIUS
    for v in corners:
        if math.hypot(x - v[0], y - v[1]) < r - 1e-13:
            return False
    for (c, lo, width) in arcs:
        dx, dy = x - c[0], y - c[1]
        d = math.hypot(dx, dy)
        if d < 1e-13:
            continue  # the centre itself is fine
        if d < 2.0 * r - 1e-13:
            ang = math.atan2(dy, dx)
            if ((ang - lo) % TWO_PI) <= width + 1e-13:
                return False
    return True


def erosion_interior(halo_obj: Halo, fill_holes: bool = False) -> ErosionInterior:
    """Exact erosion of the halo by a radius-2 disc.

    Requires a halo that fits a fundamental domain (planar loops known).
    The boundary of the interior lies on radius-2 circles centred at the
    corners of the halo boundary; sub-arcs between corner-circle
    intersections are classified by the erosion membership predicate.

    With fill_holes the negative loops are discarded first, so the region
    eroded is the filled outer region rather than the halo itself.
    """
    if not halo_obj.fits_fundamental_domain:
        raise GeometryError("erosion needs a halo that fits a fundamental domain")
    r = DISC_RADIUS
    if fill_holes:
        src_loops = [lp for lp in halo_obj.loops if lp.signed_area > 0]

        def in_region(x: float, y: float) -> bool:
            return any(_point_in_loops(x, y, [lp]) for lp in src_loops)

    else:
        src_loops = halo_obj.loops

        def in_region(x: float, y: float) -> bool:
            return _point_in_halo(x, y, halo_obj)

    corners = _collect_corners(src_loops)
    arcs = _boundary_arc_list(src_loops)
    pts = halo_obj.lifted_points

    events = [[] for _ in corners]
    for i in range(len(corners)):
        for j in range(i + 1, len(corners)):
            ipts, _ = circle_pair_intersections(corners[i], r, corners[j], r)
            if ipts:
                events[i].extend(_angles_on_circle(corners[i], ipts))
                events[j].extend(_angles_on_circle(corners[j], ipts))
    kept = []
    full = []
    for i, v in enumerate(corners):
        if not events[i]:
            probe_t = 0.37  # arbitrary fixed angle
            px = v[0] + r * math.cos(probe_t)
            py = v[1] + r * math.sin(probe_t)
            if in_region(px, py) and _erosion_membership(px, py, arcs, corners):
                # Region outside the corner disc: clockwise full circle.
                full.append(
                    Loop(
                        arcs=[ArcSegment((v[0], v[1]), r, math.pi, -math.pi)],
                        signed_area=-math.pi * r * r,
                        length=TWO_PI * r,
                    )
                )
            continue
        for (a, b) in _split_intervals(events[i]):
            tm = 0.5 * (a + b)
            mx = v[0] + r * math.cos(tm)
            my = v[1] + r * math.sin(tm)
            if in_region(mx, my) and _erosion_membership(mx, my, arcs, corners):
                # Clockwise: interior region lies outside the corner disc.
                kept.append(ArcSegment((v[0], v[1]), r, b, a))
    loops = chain_arcs(kept)
    loops.extend(full)

    area = sum(lp.signed_area for lp in loops)
    blen = sum(lp.length for lp in loops)
    n_pos = sum(1 for lp in loops if lp.signed_area > 0)
    n_neg = sum(1 for lp in loops if lp.signed_area < 0)

    isolated = []
    for p in pts:
        x, y = float(p[0]), float(p[1])
        on_curve = False
        for lp in loops:
            for a in lp.arcs:
                d = math.hypot(x - a.centre[0], y - a.centre[1])
                if abs(d - r) < CHAIN_TOL:
                    lo, width = a.angle_interval
                    ang = math.atan2(y - a.centre[1], x - a.centre[0])
                    if ((ang - lo) % TWO_PI) <= width + 1e-12:
                        on_curve = True
                        break
            if on_curve:
                break
        if on_curve:
            continue
        if loops and _point_in_loops(x, y, loops):
            continue
        isolated.append((x, y))

    return ErosionInterior(
        loops=loops,
        isolated_points=isolated,
        area=area,
        boundary_length=blen,
        n_components=n_pos + len(isolated),
        n_holes=n_neg,
        euler_characteristic=n_pos - n_neg + len(isolated),
        corners=corners,
    )


def _point_in_halo(x, y, halo_obj: Halo) -> bool:
    r = DISC_RADIUS
    for p in halo_obj.lifted_points:
        if math.hypot(x - p[0], y - p[1]) <= r + 1e-13:
            return True
    return False


# ---------------------------------------------------------------------------
# dilation roundtrip and the Steiner-type identity


def dilation_area(interior: ErosionInterior) -> float:
    """Exact area of the interior dilated by a radius-2 disc.

    The dilation is the union of: the interior region itself, a radius-4
    angular sector around each boundary-corner for the angles its boundary
    arcs cover, a radius-2 disc around each region vertex, and a radius-2
    disc around each isolated point. Its boundary lies on the radius-4
    corner circles and radius-2 vertex/isolated circles. Because sectors
    touch vertex discs tangentially (no transversal circle intersection
    marks the transition), boundary pieces are classified adaptively: each
    candidate sub-arc is sampled densely and bisected wherever the boundary
    predicate flips, localising transition angles to 1e-12.
    """
    r = DISC_RADIUS
    sectors = {}
    vertices = []
    for lp in interior.loops:
        single_full = (
            len(lp.arcs) == 1
            and abs(abs(lp.arcs[0].t1 - lp.arcs[0].t0) - TWO_PI) < 1e-12
        )
        for a in lp.arcs:
            key = (a.centre[0], a.centre[1])
            sectors.setdefault(key, []).append(a.angle_interval)
            if not single_full:
                vertices.append(a.start)
    vertices.extend(interior.isolated_points)

    sector_list = [((c[0], c[1]), ivs) for c, ivs in sectors.items()]
    circles = [(c, 2.0 * r, ivs) for c, ivs in sectors.items()]
    circles += [((w[0], w[1]), r, None) for w in vertices]
    if not circles:
        return 0.0

    def inside_dilation_strict(x, y) -> bool:
        for (c, ivs) in sector_list:
            d = math.hypot(x - c[0], y - c[1])
            if d < 2.0 * r - 1e-12:
                ang = math.atan2(y - c[1], x - c[0])
                for (lo, width) in ivs:
                    if ((ang - lo) % TWO_PI) <= width + 1e-13:
                        return True
        for w in vertices:
            if math.hypot(x - w[0], y - w[1]) < r - 1e-12:
                return True
        if interior.loops and _point_in_loops(x, y, interior.loops):
            return True
        return False

    def on_boundary(c, ri, ivs, t) -> bool:
        # The point must not be interior to the dilation, and a radius-4
        # candidate must bound its own sector's angle set.
        if ivs is not None:
            if not any(((t - lo) % TWO_PI) <= width + 1e-13 for (lo, width) in ivs):
                return False
        x = c[0] + ri * math.cos(t)
        y = c[1] + ri * math.sin(t)
        return not inside_dilation_strict(x, y)

    events = [[] for _ in circles]
    for i in range(len(circles)):
        ci, ri, _ = circles[i]
        for j in range(i + 1, len(circles)):
            cj, rj, _ = circles[j]
            pts, _t = circle_pair_intersections(ci, ri, cj, rj)
            if pts:
                events[i].extend(_angles_on_circle(ci, pts))
                events[j].extend(_angles_on_circle(cj, pts))
    # Sector angle-set endpoints are genuine feature edges on their circle.
    for i, (c, ri, ivs) in enumerate(circles):
        if ivs is not None:
            for (lo, width) in ivs:
                events[i].extend([_norm_angle(lo), _norm_angle(lo + width)])

    area = 0.0
    for c, ri, ivs, a, b in _adaptive_pieces(circles, events, on_boundary):
        area += ArcSegment((c[0], c[1]), ri, a, b).green_area
    return area


def _norm_angle(t: float) -> float:
    return math.atan2(math.sin(t), math.cos(t))


def _adaptive_pieces(circles, events, on_boundary, samples: int = 17):
    """Yield (centre, radius, ivs, a, b) boundary pieces, bisecting any
    sub-interval on which the predicate is not constant."""
    for i, (c, ri, ivs) in enumerate(circles):
        base = _split_intervals(events[i])
        stack = list(base)
        while stack:
            (a, b) = stack.pop()
            ts = [a + (b - a) * (k + 0.5) / samples for k in range(samples)]
            flags = [on_boundary(c, ri, ivs, t) for t in ts]
            if all(flags):
                yield (c, ri, ivs, a, b)
            elif not any(flags):
                continue
            else:
                # Localise one flip and split there.
                k = next(k for k in range(samples - 1) if flags[k] != flags[k + 1])
                lo_t, hi_t = ts[k], ts[k + 1]
                f_lo = flags[k]
                for _ in range(60):
                    mid = 0.5 * (lo_t + hi_t)
                    if on_boundary(c, ri, ivs, mid) == f_lo:
                        lo_t = mid
                    else:
                        hi_t = mid
                    if hi_t - lo_t < 1e-12:
                        break
                cut = 0.5 * (lo_t + hi_t)
                if cut - a > 1e-12:
                    stack.append((a, cut))
                if b - cut > 1e-12:
                    stack.append((cut, b))


@dataclass
class SteinerReport:
    """Tube-formula consistency of halo vs eroded interior."""

    halo_area: float
    interior_area: float
    interior_boundary_length: float
    euler_characteristic: int
    residual: float
    within_tolerance: bool
    condition_flag: bool  # True when the identity failed: interior too thin


def steiner_identity_check(
    halo_obj: Halo, interior: ErosionInterior | None = None, tol: float = 1e-9
) -> SteinerReport:
    """|S \\ S^-| must equal 2 * length(boundary of S^-) + 4*pi*chi(S^-).

    The identity holds whenever the interior is 2-regular (each boundary
    point sees a full tangent disc of radius 2 on the outside); a nonzero
    residual flags interiors with necks or cusps thinner than the disc.
    """
    if interior is None:
        interior = erosion_interior(halo_obj)
    diff = halo_obj.area - interior.area
    residual = diff - 2.0 * interior.boundary_length - SINGLE_DISC_AREA * (
        interior.euler_characteristic
    )
    ok = abs(residual) <= tol
    return SteinerReport(
        halo_area=halo_obj.area,
        interior_area=interior.area,
        interior_boundary_length=interior.boundary_length,
        euler_characteristic=interior.euler_characteristic,
        residual=residual,
        within_tolerance=ok,
        condition_flag=not ok,
    )


# ---------------------------------------------------------------------------
# Hausdorff distance to a circle


def hausdorff_to_circle(halo_obj: Halo, centre, radius: float) -> float:
    """Hausdorff distance between the halo boundary and a circle.

    Exact when some boundary loop winds once around the centre (then every
    circle direction sees a boundary point at its own angle, so the radial
    extremes realise both Hausdorff directions). Otherwise falls back to a
    dense angular scan of the circle side, which upper-bounds the defect
    direction to the scan resolution.
    """
    if not halo_obj.fits_fundamental_domain or not halo_obj.loops:
        raise GeometryError("hausdorff_to_circle needs planar boundary loops")
    cx, cy = float(centre[0]), float(centre[1])
    sup_dev = 0.0
    for lp in halo_obj.loops:
        for a in lp.arcs:
            d = math.hypot(a.centre[0] - cx, a.centre[1] - cy)
            cand = [a.t0, a.t1]
            psi = math.atan2(a.centre[1] - cy, a.centre[0] - cx)
            lo, width = a.angle_interval
            for t in (psi, psi + math.pi):
                if ((t - lo) % TWO_PI) <= width:
                    cand.append(t)
            for t in cand:
                x, y = a.point_at(t)
                sup_dev = max(sup_dev, abs(math.hypot(x - cx, y - cy) - radius))
    winds = any(abs(lp.winding_about((cx, cy))) == 1 for lp in halo_obj.loops)
    if winds:
        return sup_dev
    # Fallback: the boundary does not surround the centre; scan the circle.
    other = 0.0
    n_scan = 4096
    for k in range(n_scan):
        t = TWO_PI * k / n_scan
        x = cx + radius * math.cos(t)
        y = cy + radius * math.sin(t)
        best = math.inf
        for lp in halo_obj.loops:
            for a in lp.arcs:
                best = min(best, _dist_point_arc(x, y, a))
        other = max(other, best)
    return max(sup_dev, other)


def _dist_point_arc(x, y, a: ArcSegment) -> float:
    dx, dy = x - a.centre[0], y - a.centre[1]
    d = math.hypot(dx, dy)
    lo, width = a.angle_interval
    if d > 1e-15:
        ang = math.atan2(dy, dx)
        if ((ang - lo) % TWO_PI) <= width:
            return abs(d - a.radius)
    d0 = math.hypot(*(np.subtract((x, y), a.start)))
    d1 = math.hypot(*(np.subtract((x, y), a.end)))
    return min(d0, d1)


# ---------------------------------------------------------------------------
# droplet rate function


def rate_function_J(halo_obj: Halo, kappa: float, interior=None) -> float:
    """Droplet cost |S| - kappa * |S^-| of a halo."""
    if not (kappa > 1.0):
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    if interior is None:
        interior = erosion_interior(halo_obj)
    return halo_obj.area - kappa * interior.area


@dataclass
class IsoperimetricReport:
    J: float
    equivalent_radius: float
    profile_value: float
    deficit: float  # (J - profile)/(pi*kappa), >= 0 up to numerics


def isoperimetric_deficit(
    halo_obj: Halo, kappa: float, interior=None
) -> IsoperimetricReport:
    """Compare the droplet cost against the round-droplet profile at the
    halo's equivalent radius R = sqrt(area/pi)."""
    from halodroplet.model_constants import phi_profile

    if interior is None:
        interior = erosion_interior(halo_obj)
    J = rate_function_J(halo_obj, kappa, interior)
    R = math.sqrt(halo_obj.area / math.pi)
    prof = phi_profile(R, kappa)
    return IsoperimetricReport(
        J=J,
        equivalent_radius=R,
        profile_value=prof,
        deficit=(J - prof) / (math.pi * kappa),
    )
