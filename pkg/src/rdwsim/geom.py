"""Exact 2D planning geometry: polygonal rooms, rays, tangent arcs, first-hit queries.

All planning runs against the *eroded free space*: the interior of the room
boundary, minus the obstacle polygons, shrunk by a clearance margin.  A point
is free iff it is inside the boundary, outside every obstacle, and at distance
>= clearance from every wall segment (closed set: points exactly at the
clearance distance count as free).

First-hit queries are computed analytically.  Each wall segment, inflated by
the clearance, forms a capsule whose boundary consists of two offset segments
plus circles of radius ``clearance`` around the segment endpoints.  A path
starting in free space first leaves free space exactly where it first crosses
into one of these capsules, so the first hit is the minimum path parameter over
all entering intersections with offset segments and endpoint circles.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .errors import ChordTooLong, InvalidEnvironment, PoseOutsideFreeSpace

TWO_PI = 2.0 * math.pi

# Numeric slack used when classifying intersections (see module docstring).
_EPS_T = 1e-12       # path-parameter slack at the start of a query
_EPS_U = 1e-9        # relative slack on segment-extent filtering
_EPS_DIR = 1e-12     # entering-direction threshold (per unit of tangent norm)
_EPS_BLOCK = 1e-9    # meters of slack when comparing a hit against a path length
_FLOAT_EPS = np.finfo(float).eps


class Point2(NamedTuple):
    """A 2D point (meters)."""

    x: float
    y: float

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other[0], self.y - other[1])


# Positions and displacements share the representation.
Vec2 = Point2


def normalize_angle(angle: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    a = math.fmod(angle, TWO_PI)
    return a + TWO_PI if a < 0.0 else a


def bearing(p: Point2, q: Point2) -> float:
    """Heading of the vector p -> q, in [0, 2*pi)."""
    return normalize_angle(math.atan2(q[1] - p[1], q[0] - p[0]))


def angle_diff(a: float, b: float) -> float:
    """Signed smallest rotation taking heading b to heading a, in (-pi, pi]."""
    d = math.fmod(a - b, TWO_PI)
    if d <= -math.pi:
        d += TWO_PI
    elif d > math.pi:
        d -= TWO_PI
    return d


@dataclass(frozen=True)
class Pose:
    """Physical position plus heading; heading is normalized to [0, 2*pi)."""

    position: Point2
    heading: float

    def __post_init__(self) -> None:
        p = self.position
        if not (math.isfinite(p[0]) and math.isfinite(p[1]) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite pose: {p}, heading={self.heading}")
        object.__setattr__(self, "position", Point2(float(p[0]), float(p[1])))
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))


@dataclass(frozen=True)
class ArcPath:
    """A constant-curvature path: positive radius bends left, None is straight."""

    start: Pose
    signed_radius: float | None
    length: float


def _signed_area(ring: Sequence[Sequence[float]]) -> float:
    s = 0.0
    n = len(ring)
    for i in range(n):
        ax, ay = ring[i]
        bx, by = ring[(i + 1) % n]
        s += ax * by - bx * ay
    return 0.5 * s


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Proper or touching intersection of two closed segments."""
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    if d1 == 0 and on_seg(q1, q2, p1):
        return True
    if d2 == 0 and on_seg(q1, q2, p2):
        return True
    if d3 == 0 and on_seg(p1, p2, q1):
        return True
    if d4 == 0 and on_seg(p1, p2, q2):
        return True
    return False


def _validate_ring(ring: Sequence[Sequence[float]], what: str) -> list[Point2]:
    if len(ring) < 3:
        raise InvalidEnvironment(f"{what} needs at least 3 vertices, got {len(ring)}")
    pts = []
    for v in ring:
        x, y = float(v[0]), float(v[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InvalidEnvironment(f"{what} has a non-finite vertex: {v!r}")
        pts.append(Point2(x, y))
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        if math.hypot(b.x - a.x, b.y - a.y) < 1e-9:
            raise InvalidEnvironment(f"{what} has repeated vertices near {a}")
    area = _signed_area(pts)
    if abs(area) < 1e-9:
        raise InvalidEnvironment(f"{what} has (near-)zero area")
    # Simplicity: non-adjacent edges must not intersect.
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = pts[j], pts[(j + 1) % n]
            if _segments_intersect(a1, a2, b1, b2):
                raise InvalidEnvironment(f"{what} is self-intersecting (edges {i} and {j})")
    if area < 0:  # normalize to CCW
        pts.reverse()
    return pts


def _point_in_ring(x: float, y: float, ring: Sequence[Point2]) -> bool:
    inside = False
    n = len(ring)
    j = n - 1
    for i in range(n):
        xi, yi = ring[i]
        xj, yj = ring[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


class PhysEnv:
    """A room boundary polygon plus obstacle polygons, with a clearance margin.

    Instances are immutable after construction; every query is a pure function,
    so an environment can be shared freely between workers.
    """

    def __init__(self, boundary, obstacles=(), clearance: float = 0.2):
        clearance = float(clearance)
        if not math.isfinite(clearance) or clearance < 0.0:
            raise InvalidEnvironment(f"clearance must be finite and >= 0, got {clearance}")
        self.boundary: tuple[Point2, ...] = tuple(_validate_ring(boundary, "boundary"))
        obs = []
        for idx, ring in enumerate(obstacles):
            obs.append(tuple(_validate_ring(ring, f"obstacle {idx}")))
        self.obstacles: tuple[tuple[Point2, ...], ...] = tuple(obs)
        self.clearance = clearance
        for idx, ring in enumerate(self.obstacles):
            for p in ring:
                if not _point_in_ring(p.x, p.y, self.boundary):
                    raise InvalidEnvironment(f"obstacle {idx} vertex {p} lies outside the boundary")
        self._build_tables()

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "PhysEnv":
        try:
            boundary = d["boundary"]
        except KeyError:
            raise InvalidEnvironment("environment JSON needs a 'boundary' key") from None
        return cls(boundary, d.get("obstacles", ()), d.get("clearance", 0.2))

    @classmethod
    def from_file(cls, path) -> "PhysEnv":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "boundary": [[p.x, p.y] for p in self.boundary],
            "obstacles": [[[p.x, p.y] for p in ring] for ring in self.obstacles],
            "clearance": self.clearance,
        }

    def fingerprint(self) -> str:
        """Stable hash of the geometry, used to validate precomputed caches."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    # -- derived geometry ----------------------------------------------------

    def _build_tables(self) -> None:
        rings = [self.boundary] + list(self.obstacles)
        segs = []          # (ax, ay, bx, by) every wall segment
        ring_of_seg = []   # index of the owning ring (0 = boundary)
        for ridx, ring in enumerate(rings):
            n = len(ring)
            for i in range(n):
                a, b = ring[i], ring[(i + 1) % n]
                segs.append((a.x, a.y, b.x, b.y))
                ring_of_seg.append(ridx)
        self._segs = tuple(segs)
        self._ring_of_seg = tuple(ring_of_seg)
        self._clear2 = self.clearance * self.clearance

        xs = [p.x for p in self.boundary]
        ys = [p.y for p in self.boundary]
        self.bbox = (min(xs), min(ys), max(xs), max(ys))
        area = _signed_area(self.boundary)
        cx = cy = 0.0
        n = len(self.boundary)
        for i in range(n):
            ax, ay = self.boundary[i]
            bx, by = self.boundary[(i + 1) % n]
            w = ax * by - bx * ay
            cx += (ax + bx) * w
            cy += (ay + by) * w
        self.centroid = Point2(cx / (6.0 * area), cy / (6.0 * area))
        self.area = area

        # Capsule primitives for the analytic first-hit kernels.  Every wall
        # segment contributes two offset segments (one per side); each carries
        # the unit normal pointing into the blocked slab.
        c = self.clearance
        off_a, off_e, off_len, off_w = [], [], [], []
        for (ax, ay, bx, by) in segs:
            ex, ey = bx - ax, by - ay
            length = math.hypot(ex, ey)
            ex, ey = ex / length, ey / length
            nx, ny = -ey, ex
            off_a.append((ax + c * nx, ay + c * ny))
            off_e.append((ex, ey))
            off_len.append(length)
            off_w.append((-nx, -ny))
            off_a.append((ax - c * nx, ay - c * ny))
            off_e.append((ex, ey))
            off_len.append(length)
            off_w.append((nx, ny))
        self._off_ax = np.array([a[0] for a in off_a])
        self._off_ay = np.array([a[1] for a in off_a])
        self._off_ex = np.array([e[0] for e in off_e])
        self._off_ey = np.array([e[1] for e in off_e])
        self._off_len = np.array(off_len)
        self._off_wx = np.array([w[0] for w in off_w])
        self._off_wy = np.array([w[1] for w in off_w])

        verts: list[tuple[float, float]] = []
        if c > 0.0:
            seen = set()
            for ring in rings:
                for p in ring:
                    key = (p.x, p.y)
                    if key not in seen:
                        seen.add(key)
                        verts.append(key)
        self._vert_x = np.array([v[0] for v in verts])
        self._vert_y = np.array([v[1] for v in verts])

    # -- point queries ---------------------------------------------------------

    def contains(self, x: float, y: float) -> bool:
        """True iff (x, y) lies in the clearance-eroded free space."""
        c2 = self._clear2
        in_boundary = False
        in_obstacle = False
        for (ax, ay, bx, by), ridx in zip(self._segs, self._ring_of_seg):
            dx, dy = bx - ax, by - ay
            px, py = x - ax, y - ay
            t = (px * dx + py * dy) / (dx * dx + dy * dy)
            if t <= 0.0:
                ddx, ddy = px, py
            elif t >= 1.0:
                ddx, ddy = x - bx, y - by
            else:
                ddx, ddy = px - t * dx, py - t * dy
            if ddx * ddx + ddy * ddy < c2:
                return False
            if (ay > y) != (by > y) and x < (bx - ax) * (y - ay) / (by - ay) + ax:
                if ridx == 0:
                    in_boundary = not in_boundary
                else:
                    in_obstacle = not in_obstacle
        return in_boundary and not in_obstacle

    def distance_to_walls(self, x: float, y: float) -> float:
        """Unsigned distance from (x, y) to the nearest wall segment."""
        best = math.inf
        for (ax, ay, bx, by) in self._segs:
            dx, dy = bx - ax, by - ay
            px, py = x - ax, y - ay
            t = (px * dx + py * dy) / (dx * dx + dy * dy)
            if t <= 0.0:
                d2 = px * px + py * py
            elif t >= 1.0:
                d2 = (x - bx) ** 2 + (y - by) ** 2
            else:
                d2 = (px - t * dx) ** 2 + (py - t * dy) ** 2
            if d2 < best:
                best = d2
        return math.sqrt(best)

    def wall_segments(self) -> tuple[tuple[float, float, float, float], ...]:
        """All wall segments as (ax, ay, bx, by), boundary first."""
        return self._segs

    def sample_free_point(self, rng) -> Point2:
        """Rejection-sample a uniform point of the eroded free space."""
        x0, y0, x1, y1 = self.bbox
        for _ in range(100000):
            x = rng.uniform(x0, x1)
            y = rng.uniform(y0, y1)
            if self.contains(x, y):
                return Point2(x, y)
        raise InvalidEnvironment("could not sample a free point (free space too thin?)")


def load_env(path) -> PhysEnv:
    return PhysEnv.from_file(path)


def _require_free(p, env: PhysEnv) -> None:
    if not env.contains(p[0], p[1]):
        raise PoseOutsideFreeSpace(f"point ({p[0]:.6f}, {p[1]:.6f}) is outside eroded free space")


# -- batched first-hit kernels ----------------------------------------------
#
# Queries are vectorized over a (q,) batch; primitives broadcast along the
# second axis, so intermediates have shape (q, n_primitives).


def ray_hits(env: PhysEnv, ox, oy, dx, dy) -> np.ndarray:
    """First-hit distances for a batch of rays (unit directions). inf = no hit."""
    ox = np.asarray(ox, dtype=float)[:, None]
    oy = np.asarray(oy, dtype=float)[:, None]
    dx = np.asarray(dx, dtype=float)[:, None]
    dy = np.asarray(dy, dtype=float)[:, None]
    best = np.full(ox.shape[0], np.inf)

    denom = dx * env._off_wx + dy * env._off_wy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((env._off_ax - ox) * env._off_wx + (env._off_ay - oy) * env._off_wy) / denom
        hx = ox + t * dx - env._off_ax
        hy = oy + t * dy - env._off_ay
        u = (hx * env._off_ex + hy * env._off_ey) / env._off_len
    valid = (denom > _EPS_DIR) & (t >= -_EPS_T) & (u >= -_EPS_U) & (u <= 1.0 + _EPS_U)
    t = np.where(valid, np.maximum(t, 0.0), np.inf)
    np.minimum(best, t.min(axis=1), out=best)

    if env._vert_x.size:
        c = env.clearance
        mx = ox - env._vert_x
        my = oy - env._vert_y
        b = dx * mx + dy * my
        disc = b * b - (mx * mx + my * my - c * c)
        ok = disc > 0.0
        t1 = -b - np.sqrt(np.where(ok, disc, 0.0))
        ok &= t1 >= -_EPS_T
        t1 = np.where(ok, np.maximum(t1, 0.0), np.inf)
        np.minimum(best, t1.min(axis=1), out=best)
    return best


def arc_hits(env: PhysEnv, px, py, cx, cy, radius, spin) -> np.ndarray:
    """First-hit arc lengths for a batch of circular paths.

    Each query starts at (px, py) on the circle centered (cx, cy) of the given
    radius and travels with ``spin`` = +1 (counterclockwise, a left turn) or
    -1 (clockwise).  Returns the arc length to the first crossing out of free
    space, or inf when the whole circle stays free.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    cx = np.asarray(cx, dtype=float)
    cy = np.asarray(cy, dtype=float)
    radius = np.asarray(radius, dtype=float)
    spin = np.asarray(spin, dtype=float)
    phi0 = np.arctan2(py - cy, px - cx)

    q = cx.shape[0]
    best = np.full(q, np.inf)
    cxc = cx[:, None]
    cyc = cy[:, None]
    r = radius[:, None]
    s = spin[:, None]
    phi0 = phi0[:, None]
    # Crossings closer to the start than this angle are treated as happening
    # at the start (guards against a hit at the pose itself wrapping to 2*pi).
    wrap_tol = np.maximum(64.0 * _FLOAT_EPS, np.minimum(1e-9, 1e-7 / r))

    def sweep_of(hx, hy):
        sw = (s * (np.arctan2(hy - cyc, hx - cxc) - phi0)) % TWO_PI
        return np.where(sw > TWO_PI - wrap_tol, 0.0, sw)

    # offset segments
    wx, wy = env._off_wx, env._off_wy
    delta = (cxc - env._off_ax) * wx + (cyc - env._off_ay) * wy
    h2 = r * r - delta * delta
    ok = h2 > 0.0
    h = np.sqrt(np.where(ok, h2, 0.0))
    fx = cxc - delta * wx
    fy = cyc - delta * wy
    for sgn in (1.0, -1.0):
        hx = fx + sgn * h * env._off_ex
        hy = fy + sgn * h * env._off_ey
        u = ((hx - env._off_ax) * env._off_ex + (hy - env._off_ay) * env._off_ey) / env._off_len
        tx = -s * (hy - cyc)
        ty = s * (hx - cxc)
        entering = (tx * wx + ty * wy) > _EPS_DIR * r
        valid = ok & entering & (u >= -_EPS_U) & (u <= 1.0 + _EPS_U)
        sw = np.where(valid, sweep_of(hx, hy), np.inf)
        np.minimum(best, sw.min(axis=1) * radius, out=best)

    # clearance circles around wall endpoints
    if env._vert_x.size:
        c = env.clearance
        ddx = env._vert_x - cxc
        ddy = env._vert_y - cyc
        d = np.hypot(ddx, ddy)
        ok = (d > _EPS_T) & (d <= r + c) & (d >= np.abs(r - c))
        with np.errstate(divide="ignore", invalid="ignore"):
            # stable chord midpoint: with e = d - r (|e| <= c), the classic
            # a = (r^2 - c^2 + d^2)/(2d) equals r + (e^2 - c^2)/(2d) exactly,
            # avoiding the 1e14-scale cancellation for huge path radii
            e = d - r
            a_minus_r = (e * e - c * c) / (2.0 * d)
            a = r + a_minus_r
            h2 = -a_minus_r * (r + a)
            ux = ddx / d
            uy = ddy / d
        ok &= h2 > 0.0
        h = np.sqrt(np.where(ok, h2, 0.0))
        mx = cxc + a * ux
        my = cyc + a * uy
        for sgn in (1.0, -1.0):
            hx = mx - sgn * h * uy
            hy = my + sgn * h * ux
            tx = -s * (hy - cyc)
            ty = s * (hx - cxc)
            entering = (tx * (env._vert_x - hx) + ty * (env._vert_y - hy)) > _EPS_DIR * r * c
            valid = ok & entering
            sw = np.where(valid, sweep_of(hx, hy), np.inf)
            np.minimum(best, sw.min(axis=1) * radius, out=best)
    return best


def arc_center(pose: Pose, signed_radius: float) -> Point2:
    """Center of the tangent circle: positive radius puts it on the user's left."""
    x, y = pose.position
    return Point2(x - signed_radius * math.sin(pose.heading),
                  y + signed_radius * math.cos(pose.heading))


# -- public scalar queries -----------------------------------------------------


def first_hit_straight(pose: Pose, env: PhysEnv) -> float:
    """Distance along the heading ray to the first exit from free space."""
    _require_free(pose.position, env)
    d = ray_hits(env,
                 [pose.position.x], [pose.position.y],
                 [math.cos(pose.heading)], [math.sin(pose.heading)])
    return float(d[0])


def first_hit_arc(pose: Pose, signed_radius: float, env: PhysEnv) -> float:
    """Arc length along the tangent circle to the first exit from free space.

    The path follows the circle of radius ``|signed_radius|`` tangent to the
    pose heading; the sign selects the turn direction (positive = left).
    Returns inf when the full circle stays inside free space.
    """
    if signed_radius == 0.0 or not math.isfinite(signed_radius):
        raise ValueError(f"signed_radius must be finite and nonzero, got {signed_radius}")
    _require_free(pose.position, env)
    center = arc_center(pose, signed_radius)
    d = arc_hits(env,
                 np.array([pose.position.x]), np.array([pose.position.y]),
                 np.array([center.x]), np.array([center.y]),
                 np.array([abs(signed_radius)]),
                 np.array([1.0 if signed_radius > 0 else -1.0]))
    return float(d[0])


def segment_blocked(p: Point2, q: Point2, env: PhysEnv) -> bool:
    """True iff the open segment p -> q leaves the eroded free space."""
    _require_free(p, env)
    s = math.hypot(q[0] - p[0], q[1] - p[1])
    if s == 0.0:
        return False
    d = ray_hits(env, [p[0]], [p[1]],
                 [(q[0] - p[0]) / s], [(q[1] - p[1]) / s])
    return bool(d[0] < s - _EPS_BLOCK)


def arc_blocked(p: Point2, q: Point2, radius: float,
                chirality: Literal["left", "right"], env: PhysEnv) -> bool:
    """True iff the minor arc of the given turn direction from p to q leaves free space."""
    if chirality not in ("left", "right"):
        raise ValueError(f"chirality must be 'left' or 'right', got {chirality!r}")
    _require_free(p, env)
    chord = math.hypot(q[0] - p[0], q[1] - p[1])
    if chord > 2.0 * radius + 1e-9:
        raise ChordTooLong(f"|p-q| = {chord:.9f} exceeds the diameter {2 * radius:.9f}")
    if chord == 0.0:
        return False
    half = math.asin(min(1.0, chord / (2.0 * radius)))
    # chord bearing = initial heading + half-sweep for a left turn, - for right
    if chirality == "left":
        heading = bearing(Point2(*p), Point2(*q)) - half
        signed = radius
    else:
        heading = bearing(Point2(*p), Point2(*q)) + half
        signed = -radius
    length = 2.0 * half * radius
    hit = first_hit_arc(Pose(Point2(p[0], p[1]), heading), signed, env)
    return bool(hit < length - _EPS_BLOCK)
