"""Walking-time horizon: how long a pose can walk before meeting an obstacle.

For a pose, every curvature candidate is swept until it first leaves free
space; the candidate lengths become times through the walking speed, and the
horizon is the best time achievable with the fastest allowed translation gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PoseOutsideFreeSpace
from .gaincurve import CurvatureCandidate, GainBounds, preference_order
from .geom import PhysEnv, Point2, Pose, arc_hits, ray_hits


@dataclass(frozen=True)
class HorizonReport:
    """Per-candidate free lengths and times for one pose."""

    lengths: tuple[float, ...]    # meters, inf when the whole circle is free
    times: tuple[float, ...]      # lengths / v
    max_time: float               # best time at the maximum translation gain
    best_index: int
    best: CurvatureCandidate


def _candidate_lengths(position: Point2, headings: np.ndarray, env: PhysEnv,
                       candidates: list[CurvatureCandidate]) -> np.ndarray:
    """Free path lengths for every (heading, candidate) pair; shape (n_headings, n_candidates)."""
    if not env.contains(position[0], position[1]):
        raise PoseOutsideFreeSpace(
            f"position ({position[0]:.6f}, {position[1]:.6f}) is outside eroded free space")
    n_h = headings.shape[0]
    out = np.empty((n_h, len(candidates)))
    sin_h = np.sin(headings)
    cos_h = np.cos(headings)

    arc_idx = [i for i, c in enumerate(candidates) if not c.is_straight]
    if arc_idx:
        radii = np.array([candidates[i].signed_radius for i in arc_idx])
        # centers for every heading/candidate pair: p + rho * (-sin h, cos h)
        cx = (position[0] - np.outer(sin_h, radii)).ravel()
        cy = (position[1] + np.outer(cos_h, radii)).ravel()
        r = np.abs(np.tile(radii, n_h))
        spin = np.sign(np.tile(radii, n_h))
        lengths = arc_hits(env, np.full(cx.shape, position[0]), np.full(cy.shape, position[1]),
                           cx, cy, r, spin)
        out[:, arc_idx] = lengths.reshape(n_h, len(arc_idx))

    straight_idx = [i for i, c in enumerate(candidates) if c.is_straight]
    if straight_idx:
        d = ray_hits(env, np.full(n_h, position[0]), np.full(n_h, position[1]), cos_h, sin_h)
        for i in straight_idx:
            out[:, i] = d
    return out


def walk_times(pose: Pose, v: float, env: PhysEnv,
               candidates: list[CurvatureCandidate], bounds: GainBounds) -> HorizonReport:
    """Evaluate every curvature candidate from a pose.

    ``max_time`` is the longest walking time over candidates assuming the
    maximum translation gain; ties prefer the straight candidate, then the
    gentlest bend, then left turns (deterministic output for reproducible runs).
    """
    if v <= 0.0:
        raise ValueError(f"speed must be positive, got {v}")
    lengths = _candidate_lengths(pose.position, np.array([pose.heading]), env, candidates)[0]
    times = lengths / v
    best_index = -1
    best_time = -math.inf
    for i in preference_order(candidates):
        if times[i] > best_time:
            best_time = times[i]
            best_index = i
    return HorizonReport(
        lengths=tuple(float(x) for x in lengths),
        times=tuple(float(x) for x in times),
        max_time=float(best_time * bounds.g_t_max),
        best_index=best_index,
        best=candidates[best_index],
    )


def max_times_by_orientation(position: Point2, v: float, env: PhysEnv,
                             orientations: list[float],
                             candidates: list[CurvatureCandidate],
                             bounds: GainBounds) -> np.ndarray:
    """Horizon time for each orientation at a position (one batched sweep)."""
    lengths = _candidate_lengths(position, np.asarray(orientations, dtype=float), env, candidates)
    return lengths.max(axis=1) * (bounds.g_t_max / v)


def t_max_over_orientations(position: Point2, v: float, env: PhysEnv,
                            orientations: list[float],
                            candidates: list[CurvatureCandidate],
                            bounds: GainBounds) -> tuple[float, float]:
    """Best orientation at a position and its horizon time.

    Ties keep the earliest orientation in the given list.
    """
    per = max_times_by_orientation(position, v, env, orientations, candidates, bounds)
    best = int(np.argmax(per))  # argmax returns the first maximum
    return float(orientations[best]), float(per[best])


def skeleton_orientations(lam: int) -> list[float]:
    """The lam evenly spaced orientations 2*pi*i/lam, normalized to [0, 2*pi)."""
    if lam < 1:
        raise ValueError(f"lam must be >= 1, got {lam}")
    return [2.0 * math.pi * (i % lam) / lam for i in range(1, lam + 1)]
