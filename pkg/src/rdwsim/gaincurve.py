"""Locomotion gain model: thresholds, the curvature candidate family, command checks.

A walker's virtual translation can be scaled relative to the physical one
(translation gain, bounded to keep the manipulation imperceptible) and the
physical path can be bent onto a circle whose radius must stay above a
detection threshold (curvature).  Commands hold one constant gain pair for a
whole walking segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class GainBounds:
    """Perceptual gain thresholds: translation gain range and minimum turn radius."""

    g_t_min: float = 0.86
    g_t_max: float = 1.26
    r_min: float = 7.5

    def __post_init__(self) -> None:
        if not (0.0 < self.g_t_min <= 1.0 <= self.g_t_max):
            raise ValueError(f"need 0 < g_t_min <= 1 <= g_t_max, got [{self.g_t_min}, {self.g_t_max}]")
        if self.r_min <= 0.0:
            raise ValueError(f"r_min must be positive, got {self.r_min}")


@dataclass(frozen=True)
class CurvatureCandidate:
    """One member of the candidate curvature family.

    ``signed_radius`` is ``alpha * r_min`` for the bending candidates and None
    for the straight candidate (kept as a distinct value rather than a huge
    radius to avoid precision loss).  Positive radius bends the walker left.
    """

    index: int
    alpha: float | None
    signed_radius: float | None

    @property
    def is_straight(self) -> bool:
        return self.signed_radius is None


@dataclass(frozen=True)
class RedirectionCommand:
    """One steering decision: optional reset heading, curvature, translation gain."""

    reset_heading: float | None
    signed_radius: float | None  # None = walk straight
    g_t: float


def candidate_alphas(k: int) -> list[float]:
    """Signed curvature factors, alternating sign with magnitudes growing in pairs.

    The j-th pair has magnitude 1 / cos(pi/(2k) * (j-1)), so the family starts
    at the tightest allowed circle on either side and spreads toward straight,
    scanning the room roughly uniformly.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    alphas = []
    for i in range(1, 2 * k + 1):
        sign = 1.0 if (i - 1) % 2 == 0 else -1.0
        alphas.append(sign / math.cos((math.pi / (2 * k)) * ((i - 1) // 2)))
    return alphas


def candidate_paths(k: int, bounds: GainBounds) -> list[CurvatureCandidate]:
    """The 2k bending candidates plus the straight candidate (2k+1 in total)."""
    cands = [
        CurvatureCandidate(index=i + 1, alpha=a, signed_radius=a * bounds.r_min)
        for i, a in enumerate(candidate_alphas(k))
    ]
    cands.append(CurvatureCandidate(index=2 * k + 1, alpha=None, signed_radius=None))
    return cands


# Candidate evaluation order used to break ties deterministically when several
# candidates allow the same walking time: straight wins (no manipulation at
# all), then the smallest bending magnitude, then the left-turning member of
# a pair.
def preference_order(candidates: list[CurvatureCandidate]) -> list[int]:
    def key(i: int):
        c = candidates[i]
        if c.is_straight:
            return (0, 0.0, 0)
        return (1, abs(c.alpha), 0 if c.alpha > 0 else 1)

    return sorted(range(len(candidates)), key=key)


def validate(cmd: RedirectionCommand, bounds: GainBounds) -> list[str]:
    """Check command invariants; returns human-readable violations (empty = ok)."""
    problems = []
    if not math.isfinite(cmd.g_t):
        problems.append(f"translation gain {cmd.g_t} is not finite")
    elif not (bounds.g_t_min - 1e-9 <= cmd.g_t <= bounds.g_t_max + 1e-9):
        problems.append(
            f"translation gain {cmd.g_t:.6f} outside [{bounds.g_t_min}, {bounds.g_t_max}]")
    if cmd.signed_radius is not None:
        if not math.isfinite(cmd.signed_radius):
            problems.append("curvature radius must be finite or None (straight)")
        elif abs(cmd.signed_radius) < bounds.r_min - 1e-9:
            problems.append(
                f"curvature radius {abs(cmd.signed_radius):.6f} below minimum {bounds.r_min}")
    if cmd.reset_heading is not None and not math.isfinite(cmd.reset_heading):
        problems.append(f"reset heading {cmd.reset_heading} is not finite")
    return problems
