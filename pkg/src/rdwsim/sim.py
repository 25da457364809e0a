"""Deterministic multi-user walking simulation with a shared reset barrier.

Each user walks toward a stream of virtual targets in an unbounded virtual
plane while the physical counterpart, bent and scaled by the active gains,
moves through that user's own room.  Whenever any walker's next step would
leave free space, every user freezes, the active controller reassigns reset
headings and gains, and walking resumes: resets take zero simulated time and
never move anyone, so the users' virtual progress stays in lockstep.

Trials are reproducible: all randomness flows from per-user Mersenne Twister
streams seeded as ``"{seed}:{user_index}"``, so a (config, seed) pair fixes
every start pose and target on any platform.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from random import Random

from .controller import (ALL_METHODS, BaselineParams, UserPlanInput,
                         baseline_step, on_turn_complete, plan_common_reset,
                         r2g_reset_heading, t_max_over_orientations)
from .errors import NumericalDivergence, SimulationStuck
from .gaincurve import GainBounds, RedirectionCommand, candidate_paths, validate
from .geom import PhysEnv, Point2, Pose, angle_diff, bearing, first_hit_arc, first_hit_straight
from .horizon import skeleton_orientations
from .skeleton import SkeletonGrid, build as build_grid

MODE_WALKING = "WALKING"
MODE_TURNING = "TURNING"
MODE_WAITING_RESET = "WAITING_RESET"  # transient: resets resolve within the step

STATUS_OK = "ok"
STATUS_DIVERGENT = "divergent"
STATUS_STUCK = "stuck"
STATUS_TIMEOUT = "timeout"


@dataclass(frozen=True)
class TrialConfig:
    """Everything a trial needs; see docs/formats.md for the JSON form."""

    env_paths: tuple[str, ...]
    method: str = "ours"
    seed: int = 0
    threshold_m: float = 400.0
    dt: float = 0.01
    v: tuple[float, ...] | float = 1.0
    bounds: GainBounds = field(default_factory=GainBounds)
    k: int = 10
    delta: float = 0.5
    lam: int = 30
    clearance: float | None = None          # overrides the env files when set
    target_range: tuple[float, float] = (2.0, 6.0)
    turn_rate: float = math.pi / 2.0
    baseline_params: BaselineParams = field(default_factory=BaselineParams)
    starts: tuple[tuple[float, float, float], ...] | None = None
    max_steps: int | None = None

    def speed_of(self, index: int) -> float:
        if isinstance(self.v, (int, float)):
            return float(self.v)
        return float(self.v[index])

    @classmethod
    def from_dict(cls, d: dict, env_paths: tuple[str, ...]) -> "TrialConfig":
        gains = d.get("gains", {})
        bounds = GainBounds(
            g_t_min=gains.get("g_t_min", 0.86),
            g_t_max=gains.get("g_t_max", 1.26),
            r_min=gains.get("curvature_radius_min", 7.5),
        )
        skel = d.get("skeleton", {})
        targets = d.get("targets", {})
        base = d.get("baselines", {})
        params = BaselineParams(
            deadband=math.radians(base.get("deadband_deg", 10.0)),
            orbit_radius_frac=base.get("orbit_radius_frac", 0.4),
            zigzag_fracs=tuple(base.get("zigzag_fracs", (0.3, 0.7))),
            zigzag_switch=base.get("zigzag_switch_m", 0.5),
        )
        v = d.get("v", 1.0)
        return cls(
            env_paths=env_paths,
            method=d.get("method", "ours"),
            seed=int(d.get("seed", 0)),
            threshold_m=float(d.get("threshold_m", 400.0)),
            dt=float(d.get("dt", 0.01)),
            v=tuple(v) if isinstance(v, (list, tuple)) else float(v),
            bounds=bounds,
            k=int(gains.get("k", 10)),
            delta=float(skel.get("delta", 0.5)),
            lam=int(skel.get("lambda", 30)),
            clearance=d.get("clearance"),
            target_range=tuple(targets.get("range_m", (2.0, 6.0))),
            baseline_params=params,
            starts=tuple(tuple(s) for s in d["starts"]) if d.get("starts") else None,
        )


@dataclass
class TrialStats:
    """Outcome of one trial.  ``wall_ms`` is the only non-reproducible field."""

    method: str
    seed: int
    n_users: int
    common_resets: int
    virtual_distances: tuple[float, ...]
    physical_distances: tuple[float, ...]
    status: str
    steps: int
    bottleneck_planned: int     # resets with a named pacing user, triggered by plan commands
    bottleneck_hits: int        # ... where that user was among the trigger set
    bottleneck_superseded: int  # named-pacing resets triggered only by post-turn commands
    gain_violations: int
    wall_ms: float = 0.0

    def deterministic_fields(self) -> tuple:
        return (self.method, self.seed, self.n_users, self.common_resets,
                self.virtual_distances, self.physical_distances, self.status,
                self.steps, self.bottleneck_planned, self.bottleneck_hits,
                self.bottleneck_superseded, self.gain_violations)


class UserState:
    """Mutable per-user simulation state."""

    __slots__ = (
        "uid", "env", "grid", "v", "px", "py", "heading", "vx", "vy", "vheading",
        "tx", "ty", "dist_remaining", "cum_virtual", "cum_physical", "mode",
        "cmd_radius", "g_t", "free_len", "seg_len", "turn_remaining", "turn_dir",
        "heading_after_turn", "zig_index", "cmd_from_plan", "rng",
    )

    def __init__(self, uid: int, env: PhysEnv, grid: SkeletonGrid | None,
                 v: float, rng: Random):
        self.uid = uid
        self.env = env
        self.grid = grid
        self.v = v
        self.rng = rng
        self.px = self.py = self.heading = 0.0
        self.vx = self.vy = self.vheading = 0.0
        self.tx = self.ty = 0.0
        self.dist_remaining = 0.0
        self.cum_virtual = 0.0
        self.cum_physical = 0.0
        self.mode = MODE_WALKING
        self.cmd_radius: float | None = None
        self.g_t = 1.0
        self.free_len: float | None = None
        self.seg_len = 0.0
        self.turn_remaining = 0.0
        self.turn_dir = 1.0
        self.heading_after_turn = 0.0
        self.zig_index = 0
        self.cmd_from_plan = False

    @property
    def pose(self) -> Pose:
        return Pose(Point2(self.px, self.py), self.heading)

    @property
    def command(self) -> RedirectionCommand:
        return RedirectionCommand(reset_heading=None, signed_radius=self.cmd_radius, g_t=self.g_t)

    def plan_input(self) -> UserPlanInput:
        return UserPlanInput(
            uid=self.uid, pose=self.pose,
            virtual_position=Point2(self.vx, self.vy), virtual_heading=self.vheading,
            target=Point2(self.tx, self.ty), v=self.v, env=self.env, grid=self.grid)


def _advance_on_path(px: float, py: float, heading: float,
                     radius: float | None, ds: float) -> tuple[float, float, float]:
    """Exact kinematics: move ds meters along the commanded path."""
    if radius is None:
        return px + ds * math.cos(heading), py + ds * math.sin(heading), heading
    dphi = ds / radius
    new_heading = heading + dphi
    cx = px - radius * math.sin(heading)
    cy = py + radius * math.cos(heading)
    return (cx + radius * math.sin(new_heading),
            cy - radius * math.cos(new_heading),
            new_heading)


class Simulation:
    """One trial: users, controller context, and counters."""

    def __init__(self, config: TrialConfig,
                 envs: list[PhysEnv] | None = None,
                 grids: list[SkeletonGrid] | None = None):
        if config.method not in ALL_METHODS:
            raise ValueError(f"unknown method {config.method!r}; expected one of {ALL_METHODS}")
        self.config = config
        self.bounds = config.bounds
        self.candidates = candidate_paths(config.k, config.bounds)
        self.orientations = skeleton_orientations(config.lam)
        if envs is None:
            envs = []
            for path in config.env_paths:
                env = PhysEnv.from_file(path)
                if config.clearance is not None and config.clearance != env.clearance:
                    env = PhysEnv(env.boundary, env.obstacles, config.clearance)
                envs.append(env)
        self.envs = envs
        if config.method == "ours" and grids is None:
            cache: dict[str, SkeletonGrid] = {}
            grids = []
            for env in envs:
                fp = env.fingerprint()
                if fp not in cache:
                    cache[fp] = build_grid(env, config.delta, config.lam,
                                           config.bounds, config.k)
                grids.append(cache[fp])
        self.grids = grids

        self.users: list[UserState] = []
        for i, env in enumerate(envs):
            rng = Random(f"{config.seed}:{i}")
            u = UserState(i, env, grids[i] if grids else None, config.speed_of(i), rng)
            if config.starts is not None:
                x, y, h = config.starts[i]
                if not env.contains(x, y):
                    raise ValueError(f"configured start ({x}, {y}) for user {i} is not free")
                u.px, u.py, u.heading = float(x), float(y), float(h) % (2 * math.pi)
            else:
                p = env.sample_free_point(rng)
                u.px, u.py = p.x, p.y
                u.heading = rng.uniform(0.0, 2.0 * math.pi)
            self._sample_target(u)
            u.vheading = bearing(Point2(u.vx, u.vy), Point2(u.tx, u.ty))
            self.users.append(u)

        self.common_resets = 0
        self.steps = 0
        self.gain_violations = 0
        self.bottleneck_planned = 0
        self.bottleneck_hits = 0
        self.bottleneck_superseded = 0
        self._planned_bottleneck: int | None = None
        for u in self.users:
            self._issue_segment_command(u)

    # -- command plumbing ---------------------------------------------------

    def _sample_target(self, u: UserState) -> None:
        lo, hi = self.config.target_range
        d = u.rng.uniform(lo, hi)
        a = u.rng.uniform(0.0, 2.0 * math.pi)
        u.tx = u.vx + d * math.cos(a)
        u.ty = u.vy + d * math.sin(a)
        u.dist_remaining = d

    def _apply_command(self, u: UserState, cmd: RedirectionCommand) -> None:
        problems = validate(cmd, self.bounds)
        if problems:
            self.gain_violations += len(problems)
            raise AssertionError(f"invalid command for user {u.uid}: {problems}")
        if cmd.reset_heading is not None:
            u.heading = cmd.reset_heading % (2.0 * math.pi)
        u.cmd_radius = cmd.signed_radius
        u.g_t = cmd.g_t
        u.seg_len = 0.0
        u.free_len = None
        if self.config.method == "ours":
            # Constant command for the whole segment: precompute how far the
            # path stays free so per-step collision checks become a compare.
            if cmd.signed_radius is None:
                u.free_len = first_hit_straight(u.pose, u.env)
            else:
                u.free_len = first_hit_arc(u.pose, cmd.signed_radius, u.env)

    def _issue_segment_command(self, u: UserState) -> None:
        """Fresh steering at a segment start (trial start or completed turn)."""
        if self.config.method == "ours":
            cmd = on_turn_complete(u.plan_input(), self.bounds, self.candidates)
        else:
            cmd, u.zig_index = baseline_step(self.config.method, u.pose, u.env,
                                             self.config.baseline_params, self.bounds,
                                             u.zig_index)
        self._apply_command(u, cmd)
        u.cmd_from_plan = False

    # -- reset barrier --------------------------------------------------------

    def _common_reset(self, crossers: list[UserState]) -> None:
        self.common_resets += 1
        if self._planned_bottleneck is not None:
            # The prediction is testable only when the trigger came from a
            # command the plan itself issued; triggers by users re-commanded
            # after a completed turn are outside the plan's model.
            on_plan = [u for u in crossers if u.cmd_from_plan]
            if on_plan:
                self.bottleneck_planned += 1
                if any(u.uid == self._planned_bottleneck for u in on_plan):
                    self.bottleneck_hits += 1
            else:
                self.bottleneck_superseded += 1
        self._planned_bottleneck = None

        walking = [u for u in self.users if u.mode == MODE_WALKING]
        if self.config.method == "ours":
            plan = plan_common_reset([u.plan_input() for u in walking],
                                     self.bounds, self.candidates, self.orientations)
            for u in walking:
                self._apply_command(u, plan.commands[u.uid])
                u.cmd_from_plan = True
            self._planned_bottleneck = plan.bottleneck_uid
        else:
            crossing = {u.uid for u in crossers}
            for u in walking:
                if u.uid in crossing:
                    heading = r2g_reset_heading(
                        Point2(u.px, u.py), u.env, v=u.v, bounds=self.bounds,
                        candidates=self.candidates, orientations=self.orientations)
                else:
                    heading, _ = t_max_over_orientations(
                        Point2(u.px, u.py), u.v, u.env, self.orientations,
                        self.candidates, self.bounds)
                cmd, u.zig_index = baseline_step(self.config.method,
                                                 Pose(Point2(u.px, u.py), heading),
                                                 u.env, self.config.baseline_params,
                                                 self.bounds, u.zig_index)
                cmd = RedirectionCommand(reset_heading=heading,
                                         signed_radius=cmd.signed_radius, g_t=cmd.g_t)
                self._apply_command(u, cmd)

    # -- time stepping ----------------------------------------------------------

    def step(self, dt: float | None = None) -> None:
        """Advance one time slice; resets resolve inside the step in zero sim time."""
        dt = self.config.dt if dt is None else dt
        cfg = self.config
        baseline = cfg.method != "ours"

        if baseline:
            for u in self.users:
                if u.mode == MODE_WALKING:
                    cmd, u.zig_index = baseline_step(cfg.method, u.pose, u.env,
                                                     cfg.baseline_params, self.bounds,
                                                     u.zig_index)
                    u.cmd_radius = cmd.signed_radius
                    u.g_t = cmd.g_t

        # Tentative moves; a reset replaces commands and we try once more.
        for attempt in range(2):
            moves: list[tuple[UserState, float, float, float, float, float]] = []
            crossers: list[UserState] = []
            for u in self.users:
                if u.mode != MODE_WALKING:
                    continue
                dv = u.v * dt
                if dv >= u.dist_remaining:
                    dv = u.dist_remaining
                ds = dv / u.g_t
                nx, ny, nh = _advance_on_path(u.px, u.py, u.heading, u.cmd_radius, ds)
                if u.free_len is not None:
                    blocked = u.seg_len + ds > u.free_len
                else:
                    blocked = not u.env.contains(nx, ny)
                if blocked:
                    crossers.append(u)
                else:
                    moves.append((u, dv, ds, nx, ny, nh))
            if not crossers:
                break
            if attempt == 1:
                raise SimulationStuck(
                    f"users {[u.uid for u in crossers]} cannot advance even after a reset")
            self._common_reset(crossers)

        for (u, dv, ds, nx, ny, nh) in moves:
            u.px, u.py, u.heading = nx, ny, nh
            u.seg_len += ds
            u.cum_physical += ds
            u.cum_virtual += dv
            u.vx += dv * math.cos(u.vheading)
            u.vy += dv * math.sin(u.vheading)
            u.dist_remaining -= dv
            if not (math.isfinite(u.px) and math.isfinite(u.py)):
                raise NumericalDivergence(f"user {u.uid} position diverged at step {self.steps}")
            if u.dist_remaining <= 0.0:
                self._begin_turn(u)

        for u in self.users:
            if u.mode != MODE_TURNING:
                continue
            dth = cfg.turn_rate * dt
            if dth >= u.turn_remaining:
                dth = u.turn_remaining
            u.turn_remaining -= dth
            u.vheading += u.turn_dir * dth
            u.heading += u.turn_dir * dth
            if u.turn_remaining <= 0.0:
                u.vheading = bearing(Point2(u.vx, u.vy), Point2(u.tx, u.ty))
                u.heading = u.heading_after_turn
                u.mode = MODE_WALKING
                self._issue_segment_command(u)

        self.steps += 1

    def _begin_turn(self, u: UserState) -> None:
        u.vx, u.vy = u.tx, u.ty  # arrived: snap away accumulated rounding
        self._sample_target(u)
        new_bearing = bearing(Point2(u.vx, u.vy), Point2(u.tx, u.ty))
        delta = angle_diff(new_bearing, u.vheading)
        u.turn_remaining = abs(delta)
        u.turn_dir = 1.0 if delta >= 0.0 else -1.0
        # The physical heading mirrors the virtual turn exactly (no rotation gain).
        u.heading_after_turn = (u.heading + delta) % (2.0 * math.pi)
        u.mode = MODE_TURNING
        if u.turn_remaining == 0.0:
            u.heading = u.heading_after_turn
            u.mode = MODE_WALKING
            self._issue_segment_command(u)

    # -- trial driver -----------------------------------------------------------

    def finished(self) -> bool:
        return all(u.cum_virtual >= self.config.threshold_m for u in self.users)

    def run(self) -> TrialStats:
        cfg = self.config
        v_min = min(self.users, key=lambda u: u.v).v if self.users else 1.0
        max_steps = cfg.max_steps
        if max_steps is None:
            max_steps = int(3.0 * cfg.threshold_m / (v_min * cfg.dt)) + 200000
        t0 = time.perf_counter()
        status = STATUS_OK
        try:
            while not self.finished():
                if self.steps >= max_steps:
                    status = STATUS_TIMEOUT
                    break
                self.step()
        except NumericalDivergence:
            status = STATUS_DIVERGENT
        except SimulationStuck:
            status = STATUS_STUCK
        wall_ms = (time.perf_counter() - t0) * 1000.0
        return TrialStats(
            method=cfg.method, seed=cfg.seed, n_users=len(self.users),
            common_resets=self.common_resets,
            virtual_distances=tuple(u.cum_virtual for u in self.users),
            physical_distances=tuple(u.cum_physical for u in self.users),
            status=status, steps=self.steps,
            bottleneck_planned=self.bottleneck_planned,
            bottleneck_hits=self.bottleneck_hits,
            bottleneck_superseded=self.bottleneck_superseded,
            gain_violations=self.gain_violations,
            wall_ms=wall_ms,
        )


def run_trial(config: TrialConfig,
              envs: list[PhysEnv] | None = None,
              grids: list[SkeletonGrid] | None = None) -> TrialStats:
    """Run one seeded trial to its distance threshold."""
    return Simulation(config, envs=envs, grids=grids).run()


# -- rank statistics -------------------------------------------------------------


def _midranks(values: list[float]) -> list[float]:
    n = len(values)
    order = sorted(range(n), key=values.__getitem__)
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = 0.5 * (i + j) + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(a, b, alternative: str = "two-sided") -> tuple[float, float]:
    """Mann-Whitney U statistic of the first sample and its p-value.

    Ties get midranks.  Small pools (n1 + n2 <= 12) use the exact permutation
    distribution; larger ones a normal approximation with tie correction and
    continuity correction.  ``alternative`` is "two-sided", "greater" or "less".
    """
    a = list(a)
    b = list(b)
    n1, n2 = len(a), len(b)
    if n1 < 1 or n2 < 1:
        raise ValueError("both samples need at least one observation")
    ranks = _midranks(a + b)
    u = sum(ranks[:n1]) - n1 * (n1 + 1) / 2.0

    if n1 + n2 <= 12:
        total = ge = le = 0
        base = n1 * (n1 + 1) / 2.0
        for comb in combinations(range(n1 + n2), n1):
            us = sum(ranks[i] for i in comb) - base
            total += 1
            if us >= u - 1e-12:
                ge += 1
            if us <= u + 1e-12:
                le += 1
        p_greater = ge / total
        p_less = le / total
    else:
        n = n1 + n2
        mu = n1 * n2 / 2.0
        tie_term = 0.0
        i = 0
        sranks = sorted(ranks)
        while i < n:
            j = i
            while j + 1 < n and sranks[j + 1] == sranks[i]:
                j += 1
            t = j - i + 1
            tie_term += t ** 3 - t
            i = j + 1
        var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
        if var <= 0.0:
            p_greater = p_less = 1.0
        else:
            sd = math.sqrt(var)
            p_greater = _norm_sf((u - mu - 0.5) / sd)
            p_less = _norm_sf(-(u - mu + 0.5) / sd)

    if alternative == "greater":
        p = p_greater
    elif alternative == "less":
        p = p_less
    elif alternative == "two-sided":
        p = min(1.0, 2.0 * min(p_greater, p_less))
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return u, p
