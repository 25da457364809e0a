"""Multi-user steering decisions: coordinated common resets plus classic baselines.

The coordinated planner works from a snapshot of all users.  Each user is
classified by comparing the time left to their virtual target against the best
walking time a reset could buy at their current spot.  If anyone cannot finish
before needing another reset, the user with the smallest such horizon paces
everyone: that user is reset to walk out their full horizon, while the others
are rerouted so they sit at strong grid positions when the paced reset lands.

The planner is pure: given the same snapshot it returns the same plan, and the
per-user analyses may run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ZeroGradient
from .gaincurve import CurvatureCandidate, GainBounds, RedirectionCommand
from .geom import PhysEnv, Point2, Pose, bearing
from .horizon import t_max_over_orientations, walk_times
from .reach import reachable_skeleton_positions
from .skeleton import SkeletonGrid

WALK_LONGEST = "WALK_LONGEST"
GOTO_MAX_L = "GOTO_MAX_L"
GOTO_MAX_H = "GOTO_MAX_H"
FALLBACK_LONGEST = "FALLBACK_LONGEST"

BASELINE_METHODS = ("s2c", "s2o", "zigzag")
ALL_METHODS = ("ours",) + BASELINE_METHODS


@dataclass(frozen=True)
class UserPlanInput:
    """Snapshot of one user handed to the planner."""

    uid: int
    pose: Pose
    virtual_position: Point2
    virtual_heading: float
    target: Point2
    v: float
    env: PhysEnv
    grid: SkeletonGrid


@dataclass(frozen=True)
class UserAnalysis:
    time_to_target: float       # seconds of virtual walking left to the target
    best_reset_time: float      # best achievable horizon over reset orientations
    best_reset_heading: float
    safe: bool                  # can reach the target without another reset


@dataclass(frozen=True)
class CommonResetPlan:
    bottleneck_uid: int | None
    bottleneck_time: float      # +inf when every user is safe
    commands: dict[int, RedirectionCommand]
    roles: dict[int, str]
    destinations: dict[int, Point2 | None]  # rerouted users' grid targets


def analyze(user: UserPlanInput, bounds: GainBounds,
            candidates: list[CurvatureCandidate],
            orientations: list[float]) -> UserAnalysis:
    """Classify one user: remaining target time vs best post-reset horizon."""
    tau = user.virtual_position.dist(user.target) / user.v
    heading, best_time = t_max_over_orientations(
        user.pose.position, user.v, user.env, orientations, candidates, bounds)
    return UserAnalysis(
        time_to_target=tau,
        best_reset_time=best_time,
        best_reset_heading=heading,
        safe=best_time >= tau,
    )


def _walk_longest_command(user: UserPlanInput, heading: float, bounds: GainBounds,
                          candidates: list[CurvatureCandidate]) -> RedirectionCommand:
    report = walk_times(Pose(user.pose.position, heading), user.v, user.env, candidates, bounds)
    return RedirectionCommand(reset_heading=heading,
                              signed_radius=report.best.signed_radius,
                              g_t=bounds.g_t_max)


def _goto_command(user: UserPlanInput, budget: float, field, bounds: GainBounds):
    """Best reachable grid position under ``field``; None when nothing is reachable.

    Ties prefer the position nearest the user, then the lowest grid index.
    """
    reachable = reachable_skeleton_positions(
        user.pose.position, budget, user.v, user.env, user.grid, bounds)
    if not reachable:
        return None
    index_of = {pos: i for i, pos in enumerate(user.grid.positions)}
    best = None
    best_key = None
    for pos, plan in reachable:
        gi = index_of[pos]
        key = (-field[gi], user.pose.position.dist(pos), gi)
        if best_key is None or key < best_key:
            best_key = key
            best = plan
    return best


def plan_common_reset(users: list[UserPlanInput], bounds: GainBounds,
                      candidates: list[CurvatureCandidate],
                      orientations: list[float]) -> CommonResetPlan:
    """Coordinate one common reset across all users.

    The unsafe user with the smallest horizon becomes the pacing user and
    walks out that horizon exactly; users whose target time exceeds it are
    routed to the reachable grid position with the best single-orientation
    horizon, the rest to the most forgiving one within their own target time.
    Users with no reachable grid position simply walk their longest instead.
    """
    if not users:
        raise ValueError("plan_common_reset needs at least one user")
    users = sorted(users, key=lambda u: u.uid)
    analyses = {u.uid: analyze(u, bounds, candidates, orientations) for u in users}

    unsafe = [u for u in users if not analyses[u.uid].safe]
    bottleneck = None
    bottleneck_time = math.inf
    if unsafe:
        bottleneck = min(unsafe, key=lambda u: (analyses[u.uid].best_reset_time, u.uid))
        bottleneck_time = analyses[bottleneck.uid].best_reset_time

    commands: dict[int, RedirectionCommand] = {}
    roles: dict[int, str] = {}
    destinations: dict[int, Point2 | None] = {}
    for u in users:
        a = analyses[u.uid]
        destinations[u.uid] = None
        if bottleneck is not None and u.uid == bottleneck.uid:
            commands[u.uid] = _walk_longest_command(u, a.best_reset_heading, bounds, candidates)
            roles[u.uid] = WALK_LONGEST
            continue
        if a.time_to_target > bottleneck_time:
            plan = _goto_command(u, bottleneck_time, u.grid.best_time, bounds)
            role = GOTO_MAX_L
        else:
            plan = _goto_command(u, a.time_to_target, u.grid.harmonic_time, bounds)
            role = GOTO_MAX_H
        if plan is None:
            commands[u.uid] = _walk_longest_command(u, a.best_reset_heading, bounds, candidates)
            roles[u.uid] = FALLBACK_LONGEST
        else:
            commands[u.uid] = plan.command
            roles[u.uid] = role
            destinations[u.uid] = plan.target

    return CommonResetPlan(
        bottleneck_uid=None if bottleneck is None else bottleneck.uid,
        bottleneck_time=bottleneck_time,
        commands=commands,
        roles=roles,
        destinations=destinations,
    )


def on_turn_complete(user: UserPlanInput, bounds: GainBounds,
                     candidates: list[CurvatureCandidate]) -> RedirectionCommand:
    """Steering for a freshly turned user: best candidate at the new fixed heading."""
    report = walk_times(user.pose, user.v, user.env, candidates, bounds)
    return RedirectionCommand(reset_heading=None,
                              signed_radius=report.best.signed_radius,
                              g_t=bounds.g_t_max)


# -- baselines -----------------------------------------------------------------


@dataclass(frozen=True)
class BaselineParams:
    """Steering-loop constants for the simplified baselines."""

    deadband: float = math.radians(10.0)
    orbit_radius_frac: float = 0.4     # of the smaller bounding-box half-extent
    zigzag_fracs: tuple[float, float] = (0.3, 0.7)
    zigzag_switch: float = 0.5         # meters from the waypoint before alternating


def _bend_toward(pose: Pose, desired_heading: float,
                 params: BaselineParams, bounds: GainBounds) -> float | None:
    err = desired_heading - pose.heading
    err = math.atan2(math.sin(err), math.cos(err))
    if abs(err) <= params.deadband:
        return None
    return bounds.r_min if err > 0 else -bounds.r_min


def _s2o_desired_heading(pose: Pose, env: PhysEnv, params: BaselineParams) -> float:
    x0, y0, x1, y1 = env.bbox
    r_o = params.orbit_radius_frac * min(x1 - x0, y1 - y0) * 0.5
    cx, cy = env.centroid
    dx = pose.position.x - cx
    dy = pose.position.y - cy
    d = math.hypot(dx, dy)
    if d < 1e-12:
        return pose.heading
    if d > r_o:
        # Aim at the tangent point whose bearing is nearest the current heading.
        beta = math.asin(min(1.0, r_o / d))
        base = math.atan2(-dy, -dx)  # toward the center
        best = None
        for cand in (base - beta, base + beta):
            gap = abs(math.atan2(math.sin(cand - pose.heading), math.cos(cand - pose.heading)))
            if best is None or gap < best[0]:
                best = (gap, cand)
        return best[1]
    # Inside the orbit: blend the tangential direction with a radial push out.
    for spin in (1.0, -1.0):
        tang = math.atan2(spin * dx, -spin * dy)  # tangent of the circle at the radial point
        if abs(math.atan2(math.sin(tang - pose.heading), math.cos(tang - pose.heading))) <= math.pi / 2:
            break
    w = d / r_o
    tx = w * math.cos(tang) + (1 - w) * (dx / d)
    ty = w * math.sin(tang) + (1 - w) * (dy / d)
    return math.atan2(ty, tx)


def zigzag_waypoints(env: PhysEnv, params: BaselineParams) -> tuple[Point2, Point2]:
    x0, y0, x1, y1 = env.bbox
    f0, f1 = params.zigzag_fracs
    if (x1 - x0) >= (y1 - y0):
        yc = 0.5 * (y0 + y1)
        return (Point2(x0 + f0 * (x1 - x0), yc), Point2(x0 + f1 * (x1 - x0), yc))
    xc = 0.5 * (x0 + x1)
    return (Point2(xc, y0 + f0 * (y1 - y0)), Point2(xc, y0 + f1 * (y1 - y0)))


def baseline_step(method: str, pose: Pose, env: PhysEnv, params: BaselineParams,
                  bounds: GainBounds, zig_index: int = 0) -> tuple[RedirectionCommand, int]:
    """Instantaneous steering for one baseline; returns (command, next zigzag index).

    All baselines steer with the tightest allowed bend outside a bearing
    deadband, walk straight inside it, and never scale translation.
    """
    if method == "s2c":
        p = pose.position
        c = env.centroid
        if p.dist(c) < 1e-9:
            radius = None
        else:
            radius = _bend_toward(pose, bearing(p, c), params, bounds)
    elif method == "s2o":
        radius = _bend_toward(pose, _s2o_desired_heading(pose, env, params), params, bounds)
    elif method == "zigzag":
        w0, w1 = zigzag_waypoints(env, params)
        goal = (w0, w1)[zig_index % 2]
        if pose.position.dist(goal) <= params.zigzag_switch:
            zig_index += 1
            goal = (w0, w1)[zig_index % 2]
        radius = _bend_toward(pose, bearing(pose.position, goal), params, bounds)
    else:
        raise ValueError(f"unknown baseline {method!r}; expected one of {BASELINE_METHODS}")
    return RedirectionCommand(reset_heading=None, signed_radius=radius, g_t=1.0), zig_index


def wall_repulsion(position: Point2, env: PhysEnv) -> tuple[float, float]:
    """Sum over wall segments of the unit away-vector weighted by 1/distance^2."""
    gx = gy = 0.0
    x, y = position
    for (ax, ay, bx, by) in env.wall_segments():
        dx, dy = bx - ax, by - ay
        t = ((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy)
        t = min(1.0, max(0.0, t))
        nx = x - (ax + t * dx)
        ny = y - (ay + t * dy)
        d = math.hypot(nx, ny)
        if d < 1e-12:
            continue  # standing on a wall: direction undefined, skip the term
        gx += nx / (d * d * d)
        gy += ny / (d * d * d)
    return gx, gy


def r2g_reset_heading(position: Point2, env: PhysEnv, *, v: float = 1.0,
                      bounds: GainBounds | None = None,
                      candidates: list[CurvatureCandidate] | None = None,
                      orientations: list[float] | None = None) -> float:
    """Reset heading along the repulsive wall gradient.

    At a perfectly symmetric point the gradient vanishes; the heading of the
    best walking-time orientation is used instead when the fallback inputs are
    given, otherwise ZeroGradient is raised.
    """
    gx, gy = wall_repulsion(position, env)
    if math.hypot(gx, gy) < 1e-9:
        if bounds is None or candidates is None or orientations is None:
            raise ZeroGradient(f"repulsive gradient vanishes at {position}")
        heading, _ = t_max_over_orientations(position, v, env, orientations, candidates, bounds)
        return heading
    return math.atan2(gy, gx) % (2.0 * math.pi)
