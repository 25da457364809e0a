"""Reachable area after a reset and point-to-point plans with exact arrival times.

After a reset the walker can face any direction, so the positions reachable in
a time budget form an annulus around the start: the outer radius comes from
walking straight at the slowest translation gain (longest physical path), the
inner radius from bending the tightest allowed circle at the fastest gain.
Displacements between the two are realized either by tuning the translation
gain on a straight path or by relaxing the turn radius at full gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OutOfDomain
from .gaincurve import GainBounds, RedirectionCommand
from .geom import (PhysEnv, Point2, Pose, bearing, first_hit_arc,
                   first_hit_straight)

_RESIDUAL = 1e-6     # meters; solve_radius termination
_R_CAP = 1e8         # meters; search ceiling for the bend radius
_EPS_BLOCK = 1e-9


@dataclass(frozen=True)
class ReachAnnulus:
    """Displacement band reachable in a fixed time: s_min <= s_near <= s_max."""

    s_min: float
    s_near: float
    s_max: float


@dataclass(frozen=True)
class ReachPlan:
    """A single-segment plan: reset heading plus constant gains, arriving on time."""

    target: Point2
    command: RedirectionCommand
    arrival_time: float


def annulus(T: float, v: float, bounds: GainBounds) -> ReachAnnulus:
    """Reachable displacement band for time budget T at speed v."""
    if T < 0.0:
        raise ValueError(f"time budget must be >= 0, got {T}")
    if v <= 0.0:
        raise ValueError(f"speed must be positive, got {v}")
    s_max = v * T / bounds.g_t_min
    s_near = v * T / bounds.g_t_max
    # Chord of an arc of length s_near on the tightest circle.  Past a full
    # loop the walker can come back to the start, so the minimum drops to 0.
    two_r = 2.0 * bounds.r_min
    if s_near >= math.pi * two_r:
        s_min = 0.0
    else:
        s_min = two_r * math.sin(s_near / two_r)
    return ReachAnnulus(s_min=s_min, s_near=s_near, s_max=s_max)


def _chord_for_radius(r: float, arc_len: float) -> float:
    half = arc_len / (2.0 * r)
    return 2.0 * r * math.sin(half)


def solve_radius(s: float, T: float, v: float, bounds: GainBounds) -> float:
    """Bend radius whose arc of length v*T/g_t_max spans a chord of length s.

    The chord grows monotonically with the radius on the searched branch, so a
    plain bisection brings the residual below 1e-6 m.  Raises OutOfDomain when
    s falls outside [s_min, s_near) for the given budget.
    """
    ann = annulus(T, v, bounds)
    if not (ann.s_min <= s < ann.s_near):
        raise OutOfDomain(
            f"displacement {s:.9f} outside [{ann.s_min:.9f}, {ann.s_near:.9f}) for T={T}")
    arc_len = ann.s_near
    # Keep the swept angle <= 2*pi so the chord stays monotone in the radius.
    lo = max(bounds.r_min, arc_len / (2.0 * math.pi))
    if s <= _chord_for_radius(lo, arc_len):
        return lo
    hi = max(2.0 * lo, 1e3)
    while _chord_for_radius(hi, arc_len) < s and hi < _R_CAP:
        hi *= 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _chord_for_radius(mid, arc_len) < s:
            lo = mid
        else:
            hi = mid
        if abs(_chord_for_radius(hi, arc_len) - s) <= _RESIDUAL and hi - lo <= 1e-9 * hi:
            break
    return hi


def plan_to(p: Point2, q: Point2, T: float, v: float,
            env: PhysEnv, bounds: GainBounds) -> ReachPlan | None:
    """Plan a reset heading and gains that bring the walker from p to q in time T.

    Straight plans tune the translation gain; closer targets bend an arc at the
    fastest gain instead, trying a left turn first, then a right turn.  Returns
    None when q is out of the reachable band or every path is blocked.
    """
    if T <= 0.0:
        raise ValueError(f"time budget must be positive, got {T}")
    ann = annulus(T, v, bounds)
    p = Point2(p[0], p[1])
    q = Point2(q[0], q[1])
    s = p.dist(q)
    if s > ann.s_max:
        return None

    if s >= ann.s_near:
        heading = bearing(p, q)
        if first_hit_straight(Pose(p, heading), env) < s - _EPS_BLOCK:
            return None
        cmd = RedirectionCommand(reset_heading=heading, signed_radius=None, g_t=v * T / s)
        return ReachPlan(target=q, command=cmd, arrival_time=T)

    if s < ann.s_min:
        return None

    radius = solve_radius(s, T, v, bounds)
    arc_len = ann.s_near
    half_sweep = arc_len / (2.0 * radius)
    chord_bearing = bearing(p, q) if s > 0.0 else 0.0
    # Chord bearing sits half a sweep ahead of the start heading on a left
    # turn and half a sweep behind it on a right turn.
    for signed, heading in ((radius, chord_bearing - half_sweep),
                            (-radius, chord_bearing + half_sweep)):
        if first_hit_arc(Pose(p, heading), signed, env) >= arc_len - _EPS_BLOCK:
            cmd = RedirectionCommand(reset_heading=heading % (2.0 * math.pi),
                                     signed_radius=signed, g_t=bounds.g_t_max)
            return ReachPlan(target=q, command=cmd, arrival_time=T)
    return None


def reachable_skeleton_positions(p: Point2, T: float, v: float, env: PhysEnv,
                                 grid, bounds: GainBounds) -> list[tuple[Point2, ReachPlan]]:
    """Grid positions reachable from p in time T, each with its plan.

    Results keep the grid's position order.  A non-positive budget reaches
    nothing.
    """
    if T <= 0.0:
        return []
    ann = annulus(T, v, bounds)
    out = []
    for pos in grid.positions:
        s = p.dist(pos) if isinstance(p, Point2) else math.hypot(pos[0] - p[0], pos[1] - p[1])
        if s < ann.s_min or s > ann.s_max:
            continue
        plan = plan_to(p, pos, T, v, env, bounds)
        if plan is not None:
            out.append((pos, plan))
    return out
